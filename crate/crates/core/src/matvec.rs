//! Estimating `y = Bᵀv` in the `(BᵀB)⁻¹` norm by preconditioned row sampling
//! and a median-of-means mean estimate.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, spd_power};
use crate::oracle::{modeled_quantum_cost, CostKind, CostLedger, RowSource};
use crate::seed;
use crate::sketch::{repeated_halving, SketchConfig};

/// What to do when the Monte Carlo budget would touch more rows than `B` has.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SamplingPolicy {
    /// Always sample, whatever the budget.
    #[default]
    MonteCarlo,
    /// Sum `Bᵀv` directly (`n` row queries) when that is cheaper than sampling.
    ExactWhenCheaper,
}

#[derive(Clone, Debug)]
pub struct MatVecConfig {
    /// Accuracy of the preconditioner `W̃ ≈_γ BᵀB`.
    pub gamma: f64,
    pub policy: SamplingPolicy,
    pub sketch: SketchConfig,
}

impl Default for MatVecConfig {
    fn default() -> Self {
        MatVecConfig { gamma: 0.5, policy: SamplingPolicy::MonteCarlo, sketch: SketchConfig::default() }
    }
}

pub struct MatVecRequest<'a> {
    pub b: &'a dyn RowSource,
    pub v: &'a [f64],
    /// Declared bound `α_v ≥ ‖v‖_∞`.
    pub v_inf_bound: f64,
    pub delta: f64,
    pub failure_prob: f64,
}

#[derive(Clone, Debug)]
pub struct MatVecEstimate {
    pub y: DVector<f64>,
    pub samples_used: u64,
    /// Whether the direct sum replaced sampling.
    pub exact: bool,
}

/// `W̃ ≈_γ BᵀB` from a repeated-halving sketch, with its symmetric square
/// root and inverse square root.
#[derive(Clone, Debug)]
pub struct Preconditioner {
    pub w: DMatrix<f64>,
    pub w_half: DMatrix<f64>,
    pub w_inv_half: DMatrix<f64>,
}

impl Preconditioner {
    pub fn build(b: &dyn RowSource, cfg: &MatVecConfig, seed_value: u64, ledger: &CostLedger) -> Result<Self> {
        let sketch = repeated_halving(b, cfg.gamma, seed_value, &cfg.sketch, ledger)?;
        let w = sketch.gram();
        let w_inv_half = spd_power(&w, -0.5)?;
        let w_half = spd_power(&w, 0.5)?;
        Ok(Preconditioner { w, w_half, w_inv_half })
    }

    /// One sample `X = n·v_ℓ·W̃^{−1/2}b_ℓ` for row `ℓ` with `v_ℓ = vl`; `row`
    /// is scratch space of length `d`.
    pub fn sample(&self, b: &dyn RowSource, vl: f64, l: usize, row: &mut [f64], out: &mut [f64]) {
        b.fill_row(l, row);
        let f = b.n_rows() as f64 * vl;
        let d = row.len();
        for j in 0..d {
            let mut t = 0.0;
            for k in 0..d {
                t += self.w_inv_half[(j, k)] * row[k];
            }
            out[j] = f * t;
        }
    }
}

/// Number of groups and group size of the median-of-means estimator.
pub fn sample_budget(n: usize, d: usize, v_inf_bound: f64, delta: f64, failure_prob: f64) -> (usize, usize) {
    let groups = ((8.0 * (1.0 / failure_prob).ln()).ceil() as usize).max(1);
    let trace_bound = 1.5 * n as f64 * d as f64 * v_inf_bound * v_inf_bound;
    let size = ((16.0 * trace_bound / (delta * delta) / groups as f64).ceil() as usize).max(1);
    (groups, size)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite sample means"));
    let m = xs.len();
    if m % 2 == 1 { xs[m / 2] } else { 0.5 * (xs[m / 2 - 1] + xs[m / 2]) }
}

/// `ỹ ≈ Bᵀv` with `‖ỹ − Bᵀv‖_{(BᵀB)⁻¹} ≤ δ` with probability `1 − failure_prob`.
pub fn estimate_matvec(
    req: &MatVecRequest<'_>,
    cfg: &MatVecConfig,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<MatVecEstimate> {
    estimate_matvec_as(CostKind::MatVec, req, cfg, seed_value, ledger)
}

/// As [`estimate_matvec`], charging classical queries to `kind`. Only the
/// `MatVec` kind also charges its modeled cost `√n·d·α_v/δ`; gradient callers
/// charge their own formula.
pub(crate) fn estimate_matvec_as(
    kind: CostKind,
    req: &MatVecRequest<'_>,
    cfg: &MatVecConfig,
    seed_value: u64,
    ledger: &CostLedger,
) -> Result<MatVecEstimate> {
    let started = Instant::now();
    let (n, d) = (req.b.n_rows(), req.b.n_cols());
    if req.v.len() != n {
        return Err(Error::Shape(format!("v has length {}, B has {n} rows", req.v.len())));
    }
    if !(req.delta > 0.0) || !(req.failure_prob > 0.0 && req.failure_prob < 1.0) {
        return Err(Error::Domain("need delta > 0 and failure_prob in (0, 1)".into()));
    }
    if !(req.v_inf_bound >= 0.0) {
        return Err(Error::Domain("v_inf_bound must be nonnegative".into()));
    }
    let label = kind.label();
    let (groups, size) = sample_budget(n, d, req.v_inf_bound, req.delta, req.failure_prob);
    let total = groups as u64 * size as u64;
    let mut buf = vec![0.0; d];

    let result = if cfg.policy == SamplingPolicy::ExactWhenCheaper && total >= n as u64 {
        let mut y = DVector::zeros(d);
        for (i, &vi) in req.v.iter().enumerate() {
            if vi.abs() > req.v_inf_bound {
                return Err(Error::BoundViolated { index: i, value: vi, bound: req.v_inf_bound });
            }
            req.b.fill_row(i, &mut buf);
            for j in 0..d {
                y[j] += vi * buf[j];
            }
        }
        ledger.add_queries(label, n as u64);
        MatVecEstimate { y, samples_used: 0, exact: true }
    } else {
        let pre = Preconditioner::build(req.b, cfg, seed::derive(seed_value, "matvec.precondition"), ledger)?;
        let mut rng = seed::rng(seed::derive(seed_value, "matvec.samples"));
        let mut means = vec![vec![0.0; groups]; d];
        let mut x = vec![0.0; d];
        for g in 0..groups {
            let mut acc = vec![0.0; d];
            for _ in 0..size {
                let l = rng.random_range(0..n);
                let vl = req.v[l];
                if vl.abs() > req.v_inf_bound {
                    return Err(Error::BoundViolated { index: l, value: vl, bound: req.v_inf_bound });
                }
                if vl == 0.0 {
                    continue;
                }
                pre.sample(req.b, vl, l, &mut buf, &mut x);
                for j in 0..d {
                    acc[j] += x[j];
                }
            }
            for j in 0..d {
                means[j][g] = acc[j] / size as f64;
            }
        }
        let mu = DVector::from_iterator(d, means.iter_mut().map(|m| median(m)));
        ledger.add_queries(label, total);
        MatVecEstimate { y: &pre.w_half * mu, samples_used: total, exact: false }
    };

    if kind == CostKind::MatVec {
        let unit = modeled_quantum_cost(kind, n.max(d), d, req.delta.min(1.0))?;
        ledger.add_modeled(label, unit * req.v_inf_bound);
    }
    ledger.add_time(label, started.elapsed());
    Ok(result)
}

/// `Bᵀv` by direct accumulation.
pub fn exact_matvec(b: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    let mut y = DVector::zeros(b.ncols());
    for (i, &vi) in v.iter().enumerate() {
        for j in 0..b.ncols() {
            y[j] += b[(i, j)] * vi;
        }
    }
    y
}

/// Both sides of `‖Bᵀv − BᵀDv‖_{(BᵀB)⁻¹} ≤ ε‖v‖₂` for diagonal `D` with
/// entries in `[1 − ε, 1 + ε]`.
pub fn perturbation_bound_check(b: &DMatrix<f64>, v: &[f64], dvals: &[f64], eps: f64) -> Result<(f64, f64)> {
    if dvals.len() != v.len() || v.len() != b.nrows() {
        return Err(Error::Shape("B, v and D must agree in length".into()));
    }
    if let Some(i) = dvals.iter().position(|x| (x - 1.0).abs() > eps * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("D[{i}] = {} is outside [1 − ε, 1 + ε]", dvals[i])));
    }
    let diff: Vec<f64> = v.iter().zip(dvals).map(|(vi, di)| vi * (1.0 - di)).collect();
    let r = exact_matvec(b, &diff);
    let pinv = crate::linalg::SymPinv::new(&gram(b), crate::linalg::PINV_REL_CUTOFF).pinv;
    let lhs = r.dot(&(pinv * &r)).max(0.0).sqrt();
    let rhs = eps * v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((lhs, rhs))
}
