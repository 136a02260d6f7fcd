//! ℓp Lewis weights: the averaged fixed-point iteration, the `ρ` diagnostic
//! and the conversion to multiplicative accuracy.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{scaled_leverage, DenseRows, LeverageScratch};
use crate::oracle::{CostKind, CostLedger, ScaledRows};
use crate::seed;
use crate::sketch::{repeated_halving_as, DirectEstimator, LeverageEstimator, SketchConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LewisParams {
    pub p: f64,
    pub epsilon: f64,
}

impl LewisParams {
    pub fn new(p: f64, epsilon: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::Domain(format!("p must be a finite real >= 2, got {p}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(LewisParams { p, epsilon })
    }

    /// `T = ⌈2 ln(n/d)/ε⌉`, at least one.
    pub fn iterations(&self, n: usize, d: usize) -> usize {
        let t = (2.0 * (n as f64 / d as f64).ln() / self.epsilon).ceil();
        if t.is_finite() && t >= 1.0 { t as usize } else { 1 }
    }

    /// `α = 2/(p − 2)`.
    pub fn alpha(&self) -> f64 {
        2.0 / (self.p - 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LewisResult {
    #[serde(flatten)]
    pub params: LewisParams,
    pub weights: Vec<f64>,
    pub fp_residual: f64,
}

/// How the per-iteration leverage scores are obtained.
#[derive(Clone, Debug, Default)]
pub enum InnerScores {
    #[default]
    Exact,
    /// `(1 ± ε/4)` estimates from a fresh repeated-halving sketch.
    Sketched(SketchConfig),
}

/// Knobs for the multiplicative conversion.
#[derive(Clone, Debug)]
pub struct LewisConfig {
    /// `κ` in `μ = ε·α²/(κ√d)`.
    pub kappa: f64,
    pub inner: InnerScores,
}

impl Default for LewisConfig {
    fn default() -> Self {
        LewisConfig { kappa: 4.0, inner: InnerScores::Exact }
    }
}

/// `v^{1−2/p}`, with a fast path for `p = 4`.
fn rescale_exponent(v: &[f64], p: f64, out: &mut Vec<f64>) {
    let e = 1.0 - 2.0 / p;
    out.clear();
    if e == 0.0 {
        out.resize(v.len(), 1.0);
    } else if (e - 0.5).abs() < 1e-15 {
        out.extend(v.iter().map(|x| x.sqrt()));
    } else {
        out.extend(v.iter().map(|x| x.powf(e)));
    }
}

/// As [`rescale_exponent`] when `ln v` is already known.
fn rescale_from_log(v: &[f64], ln_v: &[f64], p: f64, out: &mut Vec<f64>) {
    let e = 1.0 - 2.0 / p;
    if e == 0.0 || (e - 0.5).abs() < 1e-15 {
        rescale_exponent(v, p, out);
    } else {
        out.clear();
        out.extend(ln_v.iter().map(|l| (e * l).exp()));
    }
}

fn check_full_rank(rows: &DenseRows) -> Result<()> {
    let mut out = vec![0.0; rows.n];
    scaled_leverage(rows, &vec![1.0; rows.n], &mut out, &mut LeverageScratch::default())
        .map_err(|_| Error::RankDeficient("Lewis weights need full column rank".into()))
}

/// `max_i |v_i / σ_i(V^{1/2−1/p}A) − 1|`.
pub fn fp_residual(a: &DMatrix<f64>, p: f64, v: &[f64]) -> Result<f64> {
    fp_residual_rows(&DenseRows::from_matrix(a), p, v)
}

fn fp_residual_rows(rows: &DenseRows, p: f64, v: &[f64]) -> Result<f64> {
    let mut u = Vec::new();
    rescale_exponent(v, p, &mut u);
    let mut sigma = vec![0.0; rows.n];
    scaled_leverage(rows, &u, &mut sigma, &mut LeverageScratch::default())?;
    Ok(v.iter().zip(&sigma).map(|(vi, si)| (vi / si - 1.0).abs()).fold(0.0, f64::max))
}

/// `ρ_i(v) = σ_i(V^{1/2}A) / v_i^{1+α}` with `α = 2/(p − 2)`.
pub fn rho(a: &DMatrix<f64>, p: f64, v: &[f64]) -> Result<Vec<f64>> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("rho needs p > 2, got {p}")));
    }
    if v.len() != a.nrows() {
        return Err(Error::Shape(format!("{} entries for {} rows", v.len(), a.nrows())));
    }
    if let Some(i) = v.iter().position(|x| !(*x > 0.0)) {
        return Err(Error::Domain(format!("v[{i}] = {} is not positive", v[i])));
    }
    let rows = DenseRows::from_matrix(a);
    let mut sigma = vec![0.0; rows.n];
    scaled_leverage(&rows, v, &mut sigma, &mut LeverageScratch::default())?;
    let alpha = 2.0 / (p - 2.0);
    Ok(sigma.iter().zip(v).map(|(s, vi)| s / vi.powf(1.0 + alpha)).collect())
}

const MAX_FP_ITERATIONS: usize = 10_000_000;
/// Largest log change between iterates treated as a fixed point. Later
/// iterates then stay within `τ·p/2` in log, far below any usable `ε`.
const FIXED_POINT_TOL: f64 = 1e-11;

/// Averaged fixed-point iteration: `v¹ = d/n`, `v^{k+1} ≈ σ((V^k)^{1/2−1/p}A)`,
/// returning the geometric mean `v̄ = (Π_k v^k)^{1/T}`.
///
/// The average is taken in the log domain, where the fixed-point map is a
/// contraction; an arithmetic mean keeps an `O(d/(nT))` bias from `v¹` that
/// ruins the relative accuracy of rows with small scores.
pub fn fp_lewis_weights(
    a: &DMatrix<f64>,
    params: LewisParams,
    inner: &InnerScores,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<LewisResult> {
    fp_lewis_weights_as(CostKind::LewisWeights, params.epsilon, a, params, inner, seed_value, ledger)
}

fn fp_lewis_weights_as(
    kind: CostKind,
    charge_eps: f64,
    a: &DMatrix<f64>,
    params: LewisParams,
    inner: &InnerScores,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<LewisResult> {
    let started = Instant::now();
    let (n, d) = a.shape();
    let rows = DenseRows::from_matrix(a);
    check_full_rank(&rows)?;
    let t_min = params.iterations(n, d);
    let ln_v1 = (d as f64 / n as f64).ln();
    let mut v = vec![d as f64 / n as f64; n];
    let mut ln_v = vec![ln_v1; n];
    let mut sum = vec![0.0; n];
    let mut u = Vec::with_capacity(n);
    let mut scratch = LeverageScratch::default();
    let mut next = vec![0.0; n];
    let mut buf = vec![0.0; d];
    let mut k = 1;
    loop {
        for (s, x) in sum.iter_mut().zip(&ln_v) {
            *s += x;
        }
        rescale_from_log(&v, &ln_v, params.p, &mut u);
        match inner {
            InnerScores::Exact => scaled_leverage(&rows, &u, &mut next, &mut scratch)?,
            InnerScores::Sketched(cfg) => {
                let view = ScaledRows::new(a, u.iter().map(|x| x.sqrt()).collect());
                let sk = repeated_halving_as(
                    CostKind::LeverageScores,
                    &view,
                    params.epsilon / 4.0,
                    seed::derive_indexed(seed_value, "lewis.inner", k as u64),
                    cfg,
                    ledger,
                )?;
                let est = DirectEstimator::new(&sk.rows, cfg.kernel_tolerance);
                for i in 0..n {
                    crate::oracle::RowSource::fill_row(&view, i, &mut buf);
                    next[i] = est.score(&buf);
                }
                if let Some(i) = next.iter().position(|x| !x.is_finite() || *x <= 0.0) {
                    return Err(Error::RankDeficient(format!(
                        "sketched score of row {i} is {}",
                        next[i]
                    )));
                }
            }
        }
        let mut drift = 0.0_f64;
        let mut step = 0.0_f64;
        for (l, x) in ln_v.iter_mut().zip(&next) {
            let lx = x.ln();
            step = step.max((lx - *l).abs());
            *l = lx;
            drift = drift.max((lx - ln_v1).abs());
        }
        // The log-mean of v¹..v^k misses its own image by about
        // |ln v^{k+1} − ln v¹|/k; the stated T assumes that drift is at most
        // ln(n/d), so keep going while it is larger.
        let done = |k: usize| k >= t_min && drift <= 0.5 * params.epsilon * k as f64;
        if done(k) || k >= MAX_FP_ITERATIONS {
            break;
        }
        if matches!(inner, InnerScores::Exact) && step <= FIXED_POINT_TOL {
            // Deterministic map at its fixed point: every later iterate equals
            // `next`, so the remaining terms of the log-sum are known.
            let drift_steps = (2.0 * drift / params.epsilon).ceil();
            let stop = (t_min as f64).max(drift_steps).max(k as f64 + 1.0).min(MAX_FP_ITERATIONS as f64) as usize;
            debug_assert!(done(stop) || stop == MAX_FP_ITERATIONS);
            let extra = (stop - k) as f64;
            for (s, x) in sum.iter_mut().zip(&ln_v) {
                *s += extra * x;
            }
            k = stop;
            break;
        }
        std::mem::swap(&mut v, &mut next);
        k += 1;
    }
    let weights: Vec<f64> = sum.iter().map(|s| (s / k as f64).exp()).collect();
    let fp_residual = fp_residual_rows(&rows, params.p, &weights)?;
    let label = kind.label();
    ledger.add_queries(label, n as u64);
    ledger.charge_modeled(kind, n, d, charge_eps.min(1.0))?;
    ledger.add_time(label, started.elapsed());
    Ok(LewisResult { params, weights, fp_residual })
}

/// Weights within `(1 ± ε)` of the true ℓp Lewis weights, by running the
/// fixed-point iteration at `μ = ε·α²/(κ√d)` (requires `p ≥ 4`).
pub fn multiplicative_lewis_weights(
    a: &DMatrix<f64>,
    p: f64,
    eps: f64,
    cfg: &LewisConfig,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<LewisResult> {
    multiplicative_lewis_weights_as(CostKind::LewisWeights, a, p, eps, cfg, seed_value, ledger)
}

pub(crate) fn multiplicative_lewis_weights_as(
    kind: CostKind,
    a: &DMatrix<f64>,
    p: f64,
    eps: f64,
    cfg: &LewisConfig,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<LewisResult> {
    if !(p >= 4.0) {
        return Err(Error::Unsupported(format!(
            "multiplicative Lewis weights need p >= 4, got {p}"
        )));
    }
    let outer = LewisParams::new(p, eps)?;
    let d = a.ncols() as f64;
    let mu = eps * outer.alpha().powi(2) / (cfg.kappa * d.sqrt());
    let inner = LewisParams::new(p, mu)?;
    let mut r = fp_lewis_weights_as(kind, eps, a, inner, &cfg.inner, seed_value, ledger)?;
    r.params = outer;
    Ok(r)
}

/// Reference weights: the averaged iteration at `ε = 1e-4` with exact scores,
/// accepted only when its own residual is at most `1e-3`.
pub fn reference_lewis_weights(a: &DMatrix<f64>, p: f64) -> Result<LewisResult> {
    let params = LewisParams::new(p, 1e-4)?;
    let r = fp_lewis_weights(a, params, &InnerScores::Exact, 0, &CostLedger::new())?;
    if r.fp_residual > 1e-3 {
        return Err(Error::NonConvergence(format!(
            "reference Lewis weights residual {} exceeds 1e-3",
            r.fp_residual
        )));
    }
    Ok(r)
}

/// High-precision weights by the plain (undamped) fixed-point map, started at
/// the leverage scores and iterated until the residual is at most `tol`.
///
/// The map is a contraction near the fixed point (rate at most `1 − 2/p` in
/// the log domain), so this converges in a few dozen steps.
pub fn converged_lewis_weights(a: &DMatrix<f64>, p: f64, tol: f64) -> Result<Vec<f64>> {
    converged_lewis_weights_rows(&DenseRows::from_matrix(a), p, tol)
}

pub(crate) fn converged_lewis_weights_rows(rows: &DenseRows, p: f64, tol: f64) -> Result<Vec<f64>> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("p must be >= 2, got {p}")));
    }
    let n = rows.n;
    let mut scratch = LeverageScratch::default();
    let mut v = vec![0.0; n];
    scaled_leverage(rows, &vec![1.0; n], &mut v, &mut scratch)?;
    let mut u = Vec::with_capacity(n);
    let mut next = vec![0.0; n];
    for _ in 0..10_000 {
        rescale_exponent(&v, p, &mut u);
        scaled_leverage(rows, &u, &mut next, &mut scratch)?;
        let res = v.iter().zip(&next).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if res <= tol {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence("Lewis fixed-point iteration stalled".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_ones() {
        let a = DMatrix::identity(4, 4);
        let r = fp_lewis_weights(&a, LewisParams::new(6.0, 0.1).unwrap(), &InnerScores::Exact, 0, &CostLedger::new()).unwrap();
        assert!(r.weights.iter().all(|w| (w - 1.0).abs() < 1e-12));
        let m = multiplicative_lewis_weights(&a, 4.0, 0.3, &LewisConfig::default(), 0, &CostLedger::new()).unwrap();
        assert!(m.weights.iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn duplicate_rows_split_evenly() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let m = multiplicative_lewis_weights(&a, 4.0, 0.2, &LewisConfig::default(), 0, &CostLedger::new()).unwrap();
        assert!(m.weights.iter().all(|w| (w - 0.5).abs() < 1e-12));
    }

    #[test]
    fn small_p_is_unsupported() {
        let a = DMatrix::identity(2, 2);
        assert!(matches!(
            multiplicative_lewis_weights(&a, 3.0, 0.1, &LewisConfig::default(), 0, &CostLedger::new()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let r = fp_lewis_weights(&a, LewisParams::new(4.0, 0.1).unwrap(), &InnerScores::Exact, 0, &CostLedger::new());
        assert!(matches!(r, Err(Error::RankDeficient(_))));
    }

    #[test]
    fn rho_rejects_nonpositive() {
        let a = DMatrix::identity(2, 2);
        assert!(rho(&a, 4.0, &[1.0, 0.0]).is_err());
        let r = rho(&a, 4.0, &[1.0, 1.0]).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-14));
    }
}
