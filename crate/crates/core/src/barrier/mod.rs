//! Self-concordant barriers for `{x : Ax > b}` behind a common trait, with
//! exact and sketched oracles for value, gradient and surrogate Hessian.
//!
//! Every barrier here has the form "gradient `−AᵀS⁻¹t`, surrogate Hessian
//! `AᵀS⁻¹TS⁻¹A`" for a per-row weight vector `t` (ones, leverage scores,
//! leverage scores plus `ρ`, or Lewis weights), which is what the generic
//! oracles below exploit.

mod lewis;
mod log;
mod registry;
mod volumetric;

pub use self::lewis::LewisBarrier;
pub use self::log::LogBarrier;
pub use self::registry::{BarrierFactory, BarrierOptions, BarrierRegistry};
pub use self::volumetric::{HybridBarrier, VolumetricBarrier};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lewis::LewisConfig;
use crate::matvec::{estimate_matvec_as, MatVecConfig, MatVecRequest, SamplingPolicy};
use crate::oracle::{CostKind, CostLedger, LpInstance, RowSource, ScaledRows};
use crate::seed;
use crate::sketch::{repeated_halving_as, SketchConfig, SpectralSketch};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "lowercase")]
pub enum BarrierKind {
    Log,
    Volumetric,
    Hybrid { rho: f64 },
    Lewis { p: f64 },
}

impl BarrierKind {
    pub fn name(&self) -> &'static str {
        match self {
            BarrierKind::Log => "log",
            BarrierKind::Volumetric => "volumetric",
            BarrierKind::Hybrid { .. } => "hybrid",
            BarrierKind::Lewis { .. } => "lewis",
        }
    }
}

/// `v_p = (p+2)^{3/2} n^{1/(p+2)} + 4·max(p,2)^{5/2}`.
pub fn lewis_vp(p: f64, n: usize) -> f64 {
    (p + 2.0).powf(1.5) * (n as f64).powf(1.0 / (p + 2.0)) + 4.0 * p.max(2.0).powf(2.5)
}

/// Tunables of the sketched oracles. Gradient mat-vecs default to the exact
/// sum whenever the sampling budget would exceed `n` rows.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub sketch: SketchConfig,
    pub matvec: MatVecConfig,
    pub lewis: LewisConfig,
    /// `κ_g` in the weight precision `ζ/(κ_g√d)` used by gradient estimates.
    pub kappa_g: f64,
    pub failure_prob: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            sketch: SketchConfig::default(),
            matvec: MatVecConfig { policy: SamplingPolicy::ExactWhenCheaper, ..Default::default() },
            lewis: LewisConfig::default(),
            kappa_g: 2.0,
            failure_prob: 0.01,
        }
    }
}

/// A barrier described by its per-row weights.
pub trait Barrier: Send + Sync + std::fmt::Debug {
    fn kind(&self) -> BarrierKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Complexity parameter `ϑ`.
    fn complexity(&self, n: usize, d: usize) -> f64;

    /// `C_b` with `H̃ ⪯ ∇²f ⪯ C_b·H̃`.
    fn sandwich(&self) -> f64;

    fn hessian_cost(&self) -> CostKind;
    fn gradient_cost(&self) -> CostKind;

    /// Whether the weights are identically one (no estimation step).
    fn unit_weights(&self) -> bool {
        false
    }

    /// Value at a point given `S⁻¹A` and the slacks.
    fn value_scaled(&self, scaled: &DMatrix<f64>, s: &DVector<f64>) -> Result<f64>;

    /// Exact weights `t` for `S⁻¹A`.
    fn exact_weights(&self, scaled: &DMatrix<f64>) -> Result<Vec<f64>>;

    /// Weights within a factor `(1 ± delta)` of the exact ones.
    fn approx_weights(
        &self,
        scaled: &DMatrix<f64>,
        delta: f64,
        cfg: &OracleConfig,
        seed: u64,
        ledger: &CostLedger,
    ) -> Result<Vec<f64>>;
}

/// `s = Ax − b`, failing at the first row that is not strictly positive.
pub fn slacks(inst: &LpInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != inst.d {
        return Err(Error::Shape(format!("x has length {}, want {}", x.len(), inst.d)));
    }
    let s = &inst.a * x - &inst.b;
    match s.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((row, &slack)) => Err(Error::InfeasibleInterior { row, slack }),
        None => Ok(s),
    }
}

/// `S⁻¹A`.
pub fn scaled_rows(a: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        let inv = 1.0 / s[i];
        for j in 0..m.ncols() {
            m[(i, j)] *= inv;
        }
    }
    m
}

/// `Σ_j ln L_jj²` for the Cholesky factor of a PD matrix.
pub(crate) fn ln_det_pd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    Ok((0..l.nrows()).map(|j| 2.0 * l[(j, j)].ln()).sum())
}

/// `Mᵀ diag(t) M`.
pub(crate) fn weighted_gram(m: &DMatrix<f64>, t: &[f64]) -> DMatrix<f64> {
    let mut w = m.clone();
    for i in 0..w.nrows() {
        let st = t[i].sqrt();
        for j in 0..w.ncols() {
            w[(i, j)] *= st;
        }
    }
    w.tr_mul(&w)
}

pub fn barrier_value(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>) -> Result<f64> {
    let s = slacks(inst, x)?;
    b.value_scaled(&scaled_rows(&inst.a, &s), &s)
}

/// `−AᵀS⁻¹t` with exact weights.
pub fn gradient_exact(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    let s = slacks(inst, x)?;
    let m = scaled_rows(&inst.a, &s);
    let t = b.exact_weights(&m)?;
    Ok(-m.tr_mul(&DVector::from_vec(t)))
}

/// `AᵀS⁻¹TS⁻¹A` with exact weights (the exact Hessian for the log barrier).
pub fn hessian_surrogate_exact(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = slacks(inst, x)?;
    let m = scaled_rows(&inst.a, &s);
    let t = b.exact_weights(&m)?;
    Ok(weighted_gram(&m, &t))
}

/// Exact gradient and surrogate Hessian from one weight computation.
pub fn exact_model(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let s = slacks(inst, x)?;
    let m = scaled_rows(&inst.a, &s);
    let t = b.exact_weights(&m)?;
    let g = -m.tr_mul(&DVector::from_column_slice(&t));
    Ok((weighted_gram(&m, &t), g))
}

#[derive(Clone, Debug)]
pub struct HessianSketch {
    pub q: DMatrix<f64>,
    pub sketch: SpectralSketch,
}

/// `Q ≈_ε H̃` built from a repeated-halving sketch of `T̃^{1/2}S⁻¹A`, with
/// `(1 ± ε/3)` weights and a sketch at `ε/3` (exact weights and `ε` for the
/// log barrier).
pub fn hessian_sketch(
    b: &dyn Barrier,
    inst: &LpInstance,
    x: &DVector<f64>,
    eps: f64,
    cfg: &OracleConfig,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<HessianSketch> {
    let s = slacks(inst, x)?;
    let m = scaled_rows(&inst.a, &s);
    hessian_sketch_scaled(b, &m, eps, cfg, seed_value, ledger, None)
}

pub(crate) fn hessian_sketch_scaled(
    b: &dyn Barrier,
    m: &DMatrix<f64>,
    eps: f64,
    cfg: &OracleConfig,
    seed_value: u64,
    ledger: &CostLedger,
    weights: Option<&[f64]>,
) -> Result<HessianSketch> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let (t, sketch_eps) = if b.unit_weights() {
        (vec![1.0; m.nrows()], eps)
    } else {
        let t = match weights {
            Some(w) => w.to_vec(),
            None => b.approx_weights(m, eps / 3.0, cfg, seed::derive(seed_value, "hessian.weights"), ledger)?,
        };
        (t, eps / 3.0)
    };
    let view = ScaledRows::new(m, t.iter().map(|v| v.sqrt()).collect());
    let sketch = repeated_halving_as(
        b.hessian_cost(),
        &view,
        sketch_eps,
        seed::derive(seed_value, "hessian.sketch"),
        &cfg.sketch,
        ledger,
    )?;
    let q = sketch.gram();
    if q.clone().cholesky().is_none() {
        return Err(Error::RankDeficient("sketched Hessian is singular".into()));
    }
    Ok(HessianSketch { q, sketch })
}

/// Weight precision used by gradient estimates: `ζ/(κ_g√d)`.
pub fn gradient_weight_precision(zeta: f64, d: usize, kappa_g: f64) -> f64 {
    zeta / (kappa_g * (d as f64).sqrt())
}

/// `g̃` with `‖g̃ − g‖_{H⁻¹} ≤ ζ` w.h.p.: the log barrier estimates `(S⁻¹A)ᵀ1`
/// at accuracy `ζ`; weighted barriers estimate `(T̃^{1/2}S⁻¹A)ᵀT̃^{1/2}1` at
/// `ζ/2` with weights at `ζ/(κ_g√d)`.
pub fn gradient_estimate(
    b: &dyn Barrier,
    inst: &LpInstance,
    x: &DVector<f64>,
    zeta: f64,
    cfg: &OracleConfig,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<DVector<f64>> {
    let s = slacks(inst, x)?;
    let m = scaled_rows(&inst.a, &s);
    gradient_estimate_scaled(b, &m, zeta, cfg, seed_value, ledger, None)
}

pub(crate) fn gradient_estimate_scaled(
    b: &dyn Barrier,
    m: &DMatrix<f64>,
    zeta: f64,
    cfg: &OracleConfig,
    seed_value: u64,
    ledger: &CostLedger,
    weights: Option<&[f64]>,
) -> Result<DVector<f64>> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::Domain(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    let (n, d) = m.shape();
    let (t, delta) = if b.unit_weights() {
        (vec![1.0; n], zeta)
    } else {
        let t = match weights {
            Some(w) => w.to_vec(),
            None => {
                let dw = gradient_weight_precision(zeta, d, cfg.kappa_g);
                b.approx_weights(m, dw, cfg, seed::derive(seed_value, "gradient.weights"), ledger)?
            }
        };
        (t, zeta / 2.0)
    };
    let root: Vec<f64> = t.iter().map(|v| v.sqrt()).collect();
    let alpha_v = root.iter().cloned().fold(0.0, f64::max);
    let view = ScaledRows::new(m, root.clone());
    let req = MatVecRequest {
        b: &view as &dyn RowSource,
        v: &root,
        v_inf_bound: alpha_v,
        delta,
        failure_prob: cfg.failure_prob,
    };
    let est = estimate_matvec_as(
        b.gradient_cost(),
        &req,
        &cfg.matvec,
        seed::derive(seed_value, "gradient.matvec"),
        ledger,
    )?;
    ledger.charge_modeled(b.gradient_cost(), n, d, zeta)?;
    Ok(-est.y)
}

/// Central-difference Hessian of the barrier value with step `h`.
pub fn hessian_fd(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let d = x.len();
    let mut hm = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (gradient_exact(b, inst, &xp)? - gradient_exact(b, inst, &xm)?) / (2.0 * h);
        hm.set_column(j, &col);
    }
    Ok(crate::linalg::symmetrize(&hm))
}

/// Central-difference gradient of the barrier value with step `h`.
pub fn gradient_fd(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let d = x.len();
    let mut g = DVector::zeros(d);
    for j in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        g[j] = (barrier_value(b, inst, &xp)? - barrier_value(b, inst, &xm)?) / (2.0 * h);
    }
    Ok(g)
}

/// Complexity parameter of `kind` with default constants (`κ_h = 1`).
pub fn complexity(kind: BarrierKind, n: usize, d: usize) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    match kind {
        BarrierKind::Log => nf,
        BarrierKind::Volumetric => nf.sqrt() * df,
        BarrierKind::Hybrid { .. } => (nf * df).sqrt(),
        BarrierKind::Lewis { p } => df * lewis_vp(p, n).powi(2),
    }
}
