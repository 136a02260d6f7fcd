use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::LpInstance;
use crate::error::{Error, Result};
use crate::seed;

/// Random tall LP with a certified strictly feasible start and a bounded
/// feasible region.
///
/// The first `2d` rows are the box `±x_j ≥ …` around `x0`; the remaining rows
/// have entries uniform in `[-1, 1]`. Every right-hand side is `b = A·x0 − s`
/// with slack `s` uniform in `[0.1, 1.1]`.
pub fn gen_random_tall_lp(n: usize, d: usize, seed_value: u64) -> Result<LpInstance> {
    if d == 0 || n < 2 * d {
        return Err(Error::Domain(format!("need n >= 2d and d >= 1, got n={n}, d={d}")));
    }
    let mut rng = seed::rng(seed::derive(seed_value, "gen_random_tall_lp"));
    let mut a = DMatrix::zeros(n, d);
    for j in 0..d {
        a[(2 * j, j)] = 1.0;
        a[(2 * j + 1, j)] = -1.0;
    }
    for i in 2 * d..n {
        for j in 0..d {
            a[(i, j)] = rng.random_range(-1.0..=1.0);
        }
    }
    let x0 = DVector::from_fn(d, |_, _| rng.random_range(-0.5..=0.5));
    let s = DVector::from_fn(n, |_, _| rng.random_range(0.1..=1.1));
    let b = &a * &x0 - s;
    let c = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    LpInstance::new(a, b, c, Some(x0))
}

/// Block matrix whose `j`-th block of `n/d` rows holds the bit string `z_j`
/// in column `j`, so that `AᵀA = diag(|z_1|, …, |z_d|)`.
pub fn gen_search_hard_matrix(n: usize, d: usize, z: &[Vec<u8>]) -> Result<DMatrix<f64>> {
    if d == 0 || !n.is_multiple_of(d) {
        return Err(Error::Shape(format!("d={d} must divide n={n}")));
    }
    let block = n / d;
    if z.len() != d || z.iter().any(|s| s.len() != block) {
        return Err(Error::Shape(format!("expected {d} bit strings of length {block}")));
    }
    let mut a = DMatrix::zeros(n, d);
    for (j, bits) in z.iter().enumerate() {
        for (k, &bit) in bits.iter().enumerate() {
            if bit > 1 {
                return Err(Error::Domain(format!("bit strings must be 0/1, found {bit}")));
            }
            a[(j * block + k, j)] = bit as f64;
        }
    }
    Ok(a)
}

/// `min c·x  s.t.  0 ≤ x ≤ 1`, started at `x0 = 1/2`.
pub fn unit_interval(c: f64) -> LpInstance {
    LpInstance::new(
        DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        DVector::from_vec(vec![0.0, -1.0]),
        DVector::from_vec(vec![c]),
        Some(DVector::from_vec(vec![0.5])),
    )
    .expect("unit interval is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic_and_feasible() {
        let a = gen_random_tall_lp(100, 3, 7).unwrap();
        let b = gen_random_tall_lp(100, 3, 7).unwrap();
        assert_eq!(a, b);
        let s = &a.a * a.x0.as_ref().unwrap() - &a.b;
        assert!(s.min() > 0.0);
    }

    #[test]
    fn hard_matrix_shapes() {
        assert!(gen_search_hard_matrix(7, 2, &[vec![0; 3], vec![0; 3]]).is_err());
        let m = gen_search_hard_matrix(4, 2, &[vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(m.norm(), 0.0);
    }
}
