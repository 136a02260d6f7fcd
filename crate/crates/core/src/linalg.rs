//! Small dense helpers shared by the sketching, weight and barrier code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used for pseudoinverses and matrix powers.
pub const PINV_REL_CUTOFF: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `AᵀA` for a dense matrix.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.tr_mul(a)
}

/// Pseudoinverse of a symmetric PSD matrix together with the projector onto
/// its kernel (absent when the matrix is nonsingular).
#[derive(Clone, Debug)]
pub struct SymPinv {
    pub pinv: DMatrix<f64>,
    pub rank: usize,
    pub kernel_projector: Option<DMatrix<f64>>,
}

impl SymPinv {
    pub fn new(g: &DMatrix<f64>, rel_cutoff: f64) -> Self {
        let d = g.nrows();
        let eig = SymmetricEigen::new(symmetrize(g));
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let cut = rel_cutoff * lmax;
        let mut pinv = DMatrix::zeros(d, d);
        let mut range = DMatrix::zeros(d, d);
        let mut rank = 0;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lmax > 0.0 && lam > cut {
                let u = eig.eigenvectors.column(k);
                pinv += (u * u.transpose()) / lam;
                range += u * u.transpose();
                rank += 1;
            }
        }
        let kernel_projector = if rank == d {
            None
        } else {
            Some(DMatrix::identity(d, d) - range)
        };
        SymPinv { pinv, rank, kernel_projector }
    }
}

/// `G^power` for a symmetric positive definite `G`; fails if any eigenvalue
/// falls below the relative cutoff.
pub fn spd_power(g: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let d = g.nrows();
    let eig = SymmetricEigen::new(symmetrize(g));
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) || lmin <= PINV_REL_CUTOFF * lmax {
        return Err(Error::RankDeficient(format!(
            "gram matrix has eigenvalues in [{lmin:e}, {lmax:e}]"
        )));
    }
    let mut out = DMatrix::zeros(d, d);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        out += (u * u.transpose()) * lam.powf(power);
    }
    Ok(out)
}

/// Extreme eigenvalues of `Q^{-1/2} H Q^{-1/2}` for PD `Q` and symmetric `H`.
pub fn whitened_extremes(q: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<(f64, f64)> {
    let chol = q.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(h)
        .ok_or(Error::NotPositiveDefinite)?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let eig = SymmetricEigen::new(symmetrize(&y));
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// `vᵀ M v`.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// `‖v‖²_{M⁻¹}` for PD `M`.
pub fn inv_quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(v.dot(&chol.solve(v)))
}

/// Row-major copy of a tall matrix for the hot loops that recompute leverage
/// scores of row rescalings many times.
#[derive(Clone, Debug)]
pub struct DenseRows {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl DenseRows {
    pub fn from_matrix(a: &DMatrix<f64>) -> Self {
        let (n, d) = a.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                data.push(a[(i, j)]);
            }
        }
        DenseRows { n, d, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

/// Reusable scratch for [`scaled_leverage`].
#[derive(Clone, Debug, Default)]
pub struct LeverageScratch {
    chol: Vec<f64>,
    y: Vec<f64>,
}

/// Leverage scores of `U^{1/2} A`, i.e. `u_i a_iᵀ(AᵀUA)⁻¹a_i`, written into
/// `out`. Requires `AᵀUA` to be positive definite.
pub fn scaled_leverage(
    a: &DenseRows,
    u: &[f64],
    out: &mut [f64],
    scratch: &mut LeverageScratch,
) -> Result<()> {
    // Small fixed widths get fully unrolled kernels; this is the hot loop of
    // every Lewis weight computation.
    match a.d {
        1 => scaled_leverage_fixed::<1>(a, u, out),
        2 => scaled_leverage_fixed::<2>(a, u, out),
        3 => scaled_leverage_fixed::<3>(a, u, out),
        4 => scaled_leverage_fixed::<4>(a, u, out),
        5 => scaled_leverage_fixed::<5>(a, u, out),
        6 => scaled_leverage_fixed::<6>(a, u, out),
        _ => scaled_leverage_dyn(a, u, out, scratch),
    }
}

fn rank_error() -> Error {
    Error::RankDeficient("rescaled matrix lost full column rank".into())
}

fn scaled_leverage_fixed<const D: usize>(a: &DenseRows, u: &[f64], out: &mut [f64]) -> Result<()> {
    let mut g = [[0.0f64; D]; D];
    for (r, &w) in a.data.chunks_exact(D).zip(u) {
        for j in 0..D {
            let wr = w * r[j];
            for k in 0..=j {
                g[j][k] += wr * r[k];
            }
        }
    }
    let mut max_diag = 0.0_f64;
    for j in 0..D {
        max_diag = max_diag.max(g[j][j]);
    }
    let mut inv_diag = [0.0f64; D];
    for j in 0..D {
        let mut s = g[j][j];
        for k in 0..j {
            s -= g[j][k] * g[j][k];
        }
        if !(s > PINV_REL_CUTOFF * max_diag) {
            return Err(rank_error());
        }
        let ljj = s.sqrt();
        g[j][j] = ljj;
        inv_diag[j] = 1.0 / ljj;
        for i in j + 1..D {
            let mut t = g[i][j];
            for k in 0..j {
                t -= g[i][k] * g[j][k];
            }
            g[i][j] = t * inv_diag[j];
        }
    }
    for ((r, &w), o) in a.data.chunks_exact(D).zip(u).zip(out.iter_mut()) {
        let mut y = [0.0f64; D];
        let mut acc = 0.0;
        for j in 0..D {
            let mut t = r[j];
            for k in 0..j {
                t -= g[j][k] * y[k];
            }
            y[j] = t * inv_diag[j];
            acc += y[j] * y[j];
        }
        *o = w * acc;
    }
    Ok(())
}

fn scaled_leverage_dyn(
    a: &DenseRows,
    u: &[f64],
    out: &mut [f64],
    scratch: &mut LeverageScratch,
) -> Result<()> {
    let (n, d) = (a.n, a.d);
    scratch.chol.clear();
    scratch.chol.resize(d * d, 0.0);
    scratch.y.resize(d, 0.0);
    let g = &mut scratch.chol;
    for i in 0..n {
        let r = a.row(i);
        let w = u[i];
        for j in 0..d {
            let wr = w * r[j];
            for k in 0..=j {
                g[j * d + k] += wr * r[k];
            }
        }
    }
    let mut max_diag = 0.0_f64;
    for j in 0..d {
        max_diag = max_diag.max(g[j * d + j]);
    }
    for j in 0..d {
        let mut s = g[j * d + j];
        for k in 0..j {
            s -= g[j * d + k] * g[j * d + k];
        }
        if !(s > PINV_REL_CUTOFF * max_diag) {
            return Err(rank_error());
        }
        let ljj = s.sqrt();
        g[j * d + j] = ljj;
        for i in j + 1..d {
            let mut t = g[i * d + j];
            for k in 0..j {
                t -= g[i * d + k] * g[j * d + k];
            }
            g[i * d + j] = t / ljj;
        }
    }
    let y = &mut scratch.y;
    for i in 0..n {
        let r = a.row(i);
        let mut acc = 0.0;
        for j in 0..d {
            let mut t = r[j];
            for k in 0..j {
                t -= g[j * d + k] * y[k];
            }
            let yj = t / g[j * d + j];
            y[j] = yj;
            acc += yj * yj;
        }
        out[i] = u[i] * acc;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_singular_has_kernel() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = SymPinv::new(&g, PINV_REL_CUTOFF);
        assert_eq!(p.rank, 1);
        assert!((p.pinv[(0, 0)] - 0.5).abs() < 1e-14);
        let k = p.kernel_projector.unwrap();
        assert!((k[(1, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaled_leverage_sums_to_rank() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0, 3.0, -1.0]);
        let rows = DenseRows::from_matrix(&a);
        let u = [1.0, 0.5, 2.0, 0.3];
        let mut out = [0.0; 4];
        scaled_leverage(&rows, &u, &mut out, &mut LeverageScratch::default()).unwrap();
        let s: f64 = out.iter().sum();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_and_dynamic_kernels_agree() {
        let a = DMatrix::from_fn(30, 6, |i, j| ((i * 13 + j * 7) % 11) as f64 - 5.0 + 0.1 * j as f64);
        let rows = DenseRows::from_matrix(&a);
        let u: Vec<f64> = (0..30).map(|i| 0.5 + (i % 4) as f64).collect();
        let mut fixed = vec![0.0; 30];
        let mut dynamic = vec![0.0; 30];
        scaled_leverage(&rows, &u, &mut fixed, &mut LeverageScratch::default()).unwrap();
        scaled_leverage_dyn(&rows, &u, &mut dynamic, &mut LeverageScratch::default()).unwrap();
        for (x, y) in fixed.iter().zip(&dynamic) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spd_power_roundtrip() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let h = spd_power(&g, 0.5).unwrap();
        assert!((&h * &h - &g).norm() < 1e-12);
    }
}
