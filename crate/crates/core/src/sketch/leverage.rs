use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, SymPinv, PINV_REL_CUTOFF};
use crate::seed;

/// Exact leverage scores `σ_i = a_iᵀ(AᵀA)⁺a_i` as squared row norms of an
/// orthonormal basis of the column space, from a column-pivoted Householder
/// QR. (A thin SVD loses accuracy in the kept left singular vectors when `A`
/// is rank deficient.)
pub fn leverage_scores_exact(a: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = a.shape();
    if n == 0 || d == 0 {
        return vec![0.0; n];
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(d)).map(|k| r[(k, k)].abs()).collect();
    let top = diag.iter().cloned().fold(0.0_f64, f64::max);
    // Same relative cutoff as the Gram pseudoinverse: λ = s².
    let cut = top * PINV_REL_CUTOFF.sqrt();
    let rank = diag.iter().take_while(|&&v| top > 0.0 && v > cut).count();
    let q = qr.q();
    (0..n).map(|i| (0..rank).map(|k| q[(i, k)] * q[(i, k)]).sum()).collect()
}

/// How generalized leverage scores are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Direct for `d ≤ 64`, JL otherwise.
    #[default]
    Auto,
    Direct,
    Jl,
}

impl ScoreMode {
    pub fn resolve(self, d: usize) -> ScoreMode {
        match self {
            ScoreMode::Auto if d <= 64 => ScoreMode::Direct,
            ScoreMode::Auto => ScoreMode::Jl,
            m => m,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "auto" => Ok(ScoreMode::Auto),
            "direct" => Ok(ScoreMode::Direct),
            "jl" => Ok(ScoreMode::Jl),
            other => Err(Error::UnknownStrategy { kind: "score mode", name: other.into() }),
        }
    }
}

/// Answers generalized leverage score queries `σ^B_i(A)` for a fixed `B`.
pub trait LeverageEstimator: Send + Sync {
    fn mode(&self) -> ScoreMode;
    /// Score of one row; `f64::INFINITY` when the row leaves the row space of `B`.
    fn score(&self, row: &[f64]) -> f64;
}

/// Exact generalized scores from an explicit `(BᵀB)⁺`.
#[derive(Clone, Debug)]
pub struct DirectEstimator {
    pub pinv_gram: DMatrix<f64>,
    pub kernel_projector: Option<DMatrix<f64>>,
    pub kernel_tolerance: f64,
}

impl DirectEstimator {
    pub fn new(b: &DMatrix<f64>, kernel_tolerance: f64) -> Self {
        let p = SymPinv::new(&gram(b), PINV_REL_CUTOFF);
        DirectEstimator {
            pinv_gram: p.pinv,
            kernel_projector: p.kernel_projector,
            kernel_tolerance,
        }
    }
}

fn in_kernel(p: &Option<DMatrix<f64>>, a: &DVector<f64>, tol: f64) -> bool {
    match p {
        None => false,
        Some(p) => (p * a).norm() > tol * a.norm(),
    }
}

impl LeverageEstimator for DirectEstimator {
    fn mode(&self) -> ScoreMode {
        ScoreMode::Direct
    }

    fn score(&self, row: &[f64]) -> f64 {
        let a = DVector::from_column_slice(row);
        if a.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        if in_kernel(&self.kernel_projector, &a, self.kernel_tolerance) {
            return f64::INFINITY;
        }
        a.dot(&(&self.pinv_gram * &a)).max(0.0)
    }
}

/// Johnson-Lindenstrauss estimator: `σ̃_i = ‖C a_i‖²` with `C = ΠB(BᵀB)⁺`,
/// and a kernel test through `C′ = Π′(I − (BᵀB)(BᵀB)⁺)`.
#[derive(Clone, Debug)]
pub struct JlEstimator {
    pub c: DMatrix<f64>,
    pub c_kernel: Option<DMatrix<f64>>,
    pub kernel_tolerance: f64,
    pub epsilon: f64,
}

/// `k × cols` Rademacher matrix with entries `±1/√k`, or `Π·B` when fed rows.
fn rademacher_times<R: Rng>(rng: &mut R, k: usize, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, d) = b.shape();
    let scale = 1.0 / (k as f64).sqrt();
    let mut out = DMatrix::zeros(k, d);
    let mut bits = 0u64;
    let mut left = 0;
    for r in 0..rows {
        for t in 0..k {
            if left == 0 {
                bits = rng.random::<u64>();
                left = 64;
            }
            let sign = if bits & 1 == 1 { scale } else { -scale };
            bits >>= 1;
            left -= 1;
            for j in 0..d {
                out[(t, j)] += sign * b[(r, j)];
            }
        }
    }
    out
}

impl JlEstimator {
    /// Sketch dimension `k = ⌈β ln(n_hint)/ε²⌉` (at least 1).
    pub fn sketch_dim(beta: f64, n_hint: usize, eps: f64) -> usize {
        ((beta * (n_hint.max(2) as f64).ln() / (eps * eps)).ceil() as usize).max(1)
    }

    pub fn new(
        b: &DMatrix<f64>,
        eps: f64,
        n_hint: usize,
        beta: f64,
        kernel_tolerance: f64,
        seed_value: u64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Domain(format!("JL epsilon must lie in (0, 1], got {eps}")));
        }
        let d = b.ncols();
        let p = SymPinv::new(&gram(b), PINV_REL_CUTOFF);
        let k = Self::sketch_dim(beta, n_hint, eps);
        let mut rng = seed::rng(seed::derive(seed_value, "jl.pi"));
        let pib = rademacher_times(&mut rng, k, b);
        let c = pib * &p.pinv;
        let c_kernel = match &p.kernel_projector {
            None => None,
            Some(proj) => {
                // Only zero/non-zero matters here, so a short projection suffices.
                let k2 = ((beta * (n_hint.max(2) as f64).ln()).ceil() as usize).max(1);
                let mut rng2 = seed::rng(seed::derive(seed_value, "jl.pi_kernel"));
                Some(rademacher_times(&mut rng2, k2, &DMatrix::identity(d, d)) * proj)
            }
        };
        Ok(JlEstimator { c, c_kernel, kernel_tolerance, epsilon: eps })
    }
}

impl LeverageEstimator for JlEstimator {
    fn mode(&self) -> ScoreMode {
        ScoreMode::Jl
    }

    fn score(&self, row: &[f64]) -> f64 {
        let a = DVector::from_column_slice(row);
        if a.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        if in_kernel(&self.c_kernel, &a, self.kernel_tolerance) {
            return f64::INFINITY;
        }
        (&self.c * &a).norm_squared()
    }
}

/// Builds the estimator for `mode` (after resolving `Auto`).
pub fn build_estimator(
    mode: ScoreMode,
    b: &DMatrix<f64>,
    jl_eps: f64,
    n_hint: usize,
    cfg: &super::SketchConfig,
    seed_value: u64,
) -> Result<Box<dyn LeverageEstimator>> {
    Ok(match mode.resolve(b.ncols()) {
        ScoreMode::Jl => Box::new(JlEstimator::new(
            b,
            jl_eps,
            n_hint,
            cfg.jl_beta,
            cfg.kernel_tolerance,
            seed_value,
        )?),
        _ => Box::new(DirectEstimator::new(b, cfg.kernel_tolerance)),
    })
}
