//! Robust short-step path following with approximate Newton steps.
//!
//! The driver is generic over the barrier (through [`NewtonOracle::barrier`])
//! and over how Newton systems are produced (exact or sketched oracles).

mod oracle;

pub use oracle::{build_oracle, ExactOracle, LocalModel, NewtonOracle, OracleMode, SketchedOracle};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::barrier::barrier_value;
use crate::error::{Error, Result};
use crate::linalg::inv_quad_form;
use crate::oracle::{CostLedger, LedgerSnapshot, LpInstance};
use crate::seed;

/// Parameters of the approximate short-step method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonParams {
    pub alpha: f64,
    pub zeta: f64,
    pub c: f64,
    pub theta: f64,
    pub beta: f64,
    pub step_delta: f64,
    pub max_inner: usize,
}

impl NewtonParams {
    /// `β = 1 + 1/(8√ϑ)`, `δ = 1/(4C)`, `max_inner = ⌈64C²⌉`.
    pub fn new(theta: f64, c: f64, alpha: f64, zeta: f64) -> Result<Self> {
        let beta = 1.0 + 1.0 / (8.0 * theta.sqrt());
        Self::with_beta(theta, c, alpha, zeta, beta)
    }

    /// Validates `(α+ζ)β + (β−1)√ϑ ≤ 1/4` and `C ≥ 1`.
    pub fn with_beta(theta: f64, c: f64, alpha: f64, zeta: f64, beta: f64) -> Result<Self> {
        if !(theta >= 1.0) || !(c >= 1.0) || !(alpha > 0.0) || !(zeta >= 0.0) || !(beta > 1.0) {
            return Err(Error::Domain(format!(
                "invalid Newton parameters: theta={theta}, C={c}, alpha={alpha}, zeta={zeta}, beta={beta}"
            )));
        }
        let lhs = (alpha + zeta) * beta + (beta - 1.0) * theta.sqrt();
        if lhs > 0.25 + 1e-15 {
            return Err(Error::Domain(format!(
                "(alpha + zeta)·beta + (beta − 1)·√theta = {lhs} exceeds 1/4"
            )));
        }
        Ok(NewtonParams {
            alpha,
            zeta,
            c,
            theta,
            beta,
            step_delta: 1.0 / (4.0 * c),
            max_inner: (64.0 * c * c).ceil() as usize,
        })
    }

    /// `⌈ln(2ϑ/(εη₀)) / ln β⌉`.
    pub fn predicted_outer(&self, eps: f64, eta0: f64) -> usize {
        let r = (2.0 * self.theta / (eps * eta0)).ln() / self.beta.ln();
        if r > 0.0 { r.ceil() as usize } else { 0 }
    }
}

/// `d̃ = −Q⁻¹g̃` and `‖d̃‖_Q`.
pub fn approx_newton_step(q: &DMatrix<f64>, g: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let chol = q.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let dir = -chol.solve(g);
    let norm = dir.dot(&(q * &dir)).max(0.0).sqrt();
    Ok((dir, norm))
}

/// Current iterate and path parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct IpmState {
    pub x: DVector<f64>,
    pub eta: f64,
}

#[derive(Clone, Debug)]
pub struct IpmSettings {
    pub alpha: f64,
    /// Evaluate the barrier at every outer iteration for the trace.
    pub record_barrier_values: bool,
    /// Overrides the `⌈64C²⌉` inner cap.
    pub max_inner: Option<usize>,
    pub max_centering: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings { alpha: 1.0 / 32.0, record_barrier_values: true, max_inner: None, max_centering: 100_000 }
    }
}

/// One approximate Newton evaluation, emitted to observers. `outer == 0`
/// marks centering, where `eta` is zero.
pub struct StepEvent<'a> {
    pub outer: usize,
    pub inner: usize,
    pub eta: f64,
    pub x: &'a DVector<f64>,
    pub model: &'a LocalModel,
    pub direction: &'a DVector<f64>,
    pub step_norm_q: f64,
    /// Step length used, when a step was taken.
    pub step: Option<f64>,
    pub x_next: Option<&'a DVector<f64>>,
    pub c_factor: f64,
}

pub trait IpmObserver {
    fn on_step(&mut self, _event: &StepEvent<'_>) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl IpmObserver for NoObserver {}

#[derive(Clone, Debug, Serialize)]
pub struct OuterRecord {
    pub outer: usize,
    pub eta: f64,
    pub inner_iterations: usize,
    pub step_norm_q: f64,
    pub barrier_value: Option<f64>,
    pub objective: f64,
    pub min_slack: f64,
    pub ledger: LedgerSnapshot,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IpmTrace {
    pub centering_iterations: usize,
    pub eta0: f64,
    pub records: Vec<OuterRecord>,
    /// Step halvings needed to stay strictly interior.
    pub backtracks: usize,
}

#[derive(Clone, Debug)]
pub struct PathResult {
    pub x: DVector<f64>,
    pub eta0: f64,
    pub eta_final: f64,
    pub outer_iterations: usize,
    pub predicted_outer: usize,
    pub params: NewtonParams,
    pub trace: IpmTrace,
}

/// Result of the initial centering phase.
#[derive(Clone, Debug)]
pub struct Centered {
    pub state: IpmState,
    pub iterations: usize,
    /// `‖c‖_{Q⁻¹}` at the centered point.
    pub c_dual_norm: f64,
}

struct Driver<'a> {
    inst: &'a LpInstance,
    oracle: &'a dyn NewtonOracle,
    params: NewtonParams,
    ledger: &'a CostLedger,
    seed: u64,
    observer: &'a mut dyn IpmObserver,
    backtracks: usize,
}

fn min_slack(inst: &LpInstance, x: &DVector<f64>) -> f64 {
    (&inst.a * x - &inst.b).min()
}

impl Driver<'_> {
    fn model(&self, x: &DVector<f64>, outer: usize, inner: usize) -> Result<LocalModel> {
        let s = seed::derive_indexed(seed::derive_indexed(self.seed, "ipm.outer", outer as u64), "ipm.inner", inner as u64);
        self.oracle.local_model(self.inst, x, s, self.ledger)
    }

    /// `x + t·dir`, halving `t` until the point is strictly interior.
    fn advance(&mut self, x: &DVector<f64>, dir: &DVector<f64>, t: f64) -> Result<(DVector<f64>, f64)> {
        let mut t = t;
        for _ in 0..60 {
            let next = x + dir * t;
            if min_slack(self.inst, &next) > 0.0 {
                return Ok((next, t));
            }
            t *= 0.5;
            self.backtracks += 1;
        }
        Err(Error::NonConvergence("no strictly interior point along the Newton direction".into()))
    }

    fn center(&mut self, x0: DVector<f64>, alpha: f64, cap: usize) -> Result<Centered> {
        crate::barrier::slacks(self.inst, &x0)?;
        let c = self.params.c;
        let mut x = x0;
        let mut k = 0;
        loop {
            let model = self.model(&x, 0, k);
            let step = model.and_then(|m| approx_newton_step(&m.q, &m.g).map(|s| (m, s)));
            let (model, (dir, nu)) = match step {
                Ok(v) => v,
                // A system that was fine at x0 and breaks later means the
                // iterates ran off along an unbounded direction.
                Err(Error::NotPositiveDefinite | Error::RankDeficient(_)) if k > 0 => {
                    return Err(Error::NonConvergence(format!(
                        "centering diverged after {k} steps; the feasible region may be unbounded"
                    )));
                }
                Err(e) => return Err(e),
            };
            if nu <= alpha / 2.0 {
                self.observer.on_step(&StepEvent {
                    outer: 0,
                    inner: k,
                    eta: 0.0,
                    x: &x,
                    model: &model,
                    direction: &dir,
                    step_norm_q: nu,
                    step: None,
                    x_next: None,
                    c_factor: c,
                })?;
                let cq = inv_quad_form(&model.q, &self.inst.c)?.max(0.0).sqrt();
                return Ok(Centered { state: IpmState { x, eta: 0.0 }, iterations: k, c_dual_norm: cq });
            }
            if k >= cap {
                return Err(Error::NonConvergence(format!(
                    "centering did not reach ‖d‖_Q ≤ α/2 within {cap} steps (last {nu:e})"
                )));
            }
            let t = 1.0 / (c * (1.0 + c.sqrt() * nu));
            let (next, used) = self.advance(&x, &dir, t)?;
            self.observer.on_step(&StepEvent {
                outer: 0,
                inner: k,
                eta: 0.0,
                x: &x,
                model: &model,
                direction: &dir,
                step_norm_q: nu,
                step: Some(used),
                x_next: Some(&next),
                c_factor: c,
            })?;
            x = next;
            k += 1;
        }
    }

    /// One outer iteration: `η ← βη`, then damped steps until `‖d̃‖_Q < α`.
    /// Returns the inner step count and the final `‖d̃‖_Q`.
    fn short_step(&mut self, state: &mut IpmState, outer: usize, max_inner: usize) -> Result<(usize, f64)> {
        let eta = self.params.beta * state.eta;
        let c_vec = self.inst.c.clone();
        let mut inner = 0;
        loop {
            let mut model = self.model(&state.x, outer, inner)?;
            let g_eta = &model.g + &c_vec * eta;
            let (dir, nu) = approx_newton_step(&model.q, &g_eta)?;
            if nu < self.params.alpha {
                model.g = g_eta;
                self.observer.on_step(&StepEvent {
                    outer,
                    inner,
                    eta,
                    x: &state.x,
                    model: &model,
                    direction: &dir,
                    step_norm_q: nu,
                    step: None,
                    x_next: None,
                    c_factor: self.params.c,
                })?;
                state.eta = eta;
                return Ok((inner, nu));
            }
            if inner >= max_inner {
                return Err(Error::NonConvergence(format!(
                    "outer iteration {outer} exceeded {max_inner} inner steps (‖d‖_Q = {nu:e}, η = {eta:e})"
                )));
            }
            let (next, used) = self.advance(&state.x, &dir, self.params.step_delta)?;
            model.g = g_eta;
            self.observer.on_step(&StepEvent {
                outer,
                inner,
                eta,
                x: &state.x,
                model: &model,
                direction: &dir,
                step_norm_q: nu,
                step: Some(used),
                x_next: Some(&next),
                c_factor: self.params.c,
            })?;
            state.x = next;
            inner += 1;
        }
    }
}

/// Parameters for `oracle` on `inst`.
pub fn newton_params(inst: &LpInstance, oracle: &dyn NewtonOracle, alpha: f64) -> Result<NewtonParams> {
    let theta = oracle.barrier().complexity(inst.n, inst.d);
    NewtonParams::new(theta, oracle.c_factor(), alpha, oracle.zeta())
}

/// Damped Newton on the pure barrier from `x0` until `‖d̃‖_Q ≤ α/2`, then
/// `η₀ = α / (2‖c‖_{Q⁻¹}(1+ζ))`.
pub fn initial_centering(
    inst: &LpInstance,
    oracle: &dyn NewtonOracle,
    settings: &IpmSettings,
    seed_value: u64,
    ledger: &CostLedger,
    observer: &mut dyn IpmObserver,
) -> Result<Centered> {
    let params = newton_params(inst, oracle, settings.alpha)?;
    let x0 = inst
        .x0
        .clone()
        .ok_or_else(|| Error::Domain("instance has no strictly feasible starting point".into()))?;
    let mut drv = Driver { inst, oracle, params, ledger, seed: seed_value, observer, backtracks: 0 };
    let mut centered = drv.center(x0, params.alpha, settings.max_centering)?;
    centered.state.eta = eta0(&params, centered.c_dual_norm);
    Ok(centered)
}

fn eta0(params: &NewtonParams, c_dual_norm: f64) -> f64 {
    params.alpha / (2.0 * c_dual_norm * (1.0 + params.zeta))
}

/// One outer iteration of the short-step method on `state`; returns the
/// number of inner steps taken.
pub fn short_step_iteration(
    inst: &LpInstance,
    oracle: &dyn NewtonOracle,
    params: &NewtonParams,
    state: &mut IpmState,
    outer: usize,
    seed_value: u64,
    ledger: &CostLedger,
    observer: &mut dyn IpmObserver,
) -> Result<usize> {
    let mut drv = Driver { inst, oracle, params: *params, ledger, seed: seed_value, observer, backtracks: 0 };
    Ok(drv.short_step(state, outer, params.max_inner)?.0)
}

/// Follows the central path until `η ≥ 2ϑ/ε`, so that `cᵀx̃ ≤ val + ε`.
pub fn path_follow(
    inst: &LpInstance,
    oracle: &dyn NewtonOracle,
    eps: f64,
    settings: &IpmSettings,
    seed_value: u64,
    ledger: &CostLedger,
    observer: &mut dyn IpmObserver,
) -> Result<PathResult> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let params = newton_params(inst, oracle, settings.alpha)?;
    let max_inner = settings.max_inner.unwrap_or(params.max_inner);
    let x0 = inst
        .x0
        .clone()
        .ok_or_else(|| Error::Domain("instance has no strictly feasible starting point".into()))?;
    let mut drv = Driver { inst, oracle, params, ledger, seed: seed_value, observer, backtracks: 0 };
    let centered = drv.center(x0, params.alpha, settings.max_centering)?;
    let mut trace = IpmTrace { centering_iterations: centered.iterations, ..Default::default() };
    let mut state = centered.state;

    if centered.c_dual_norm == 0.0 {
        // Constant objective: every feasible point is optimal.
        trace.backtracks = drv.backtracks;
        return Ok(PathResult {
            x: state.x,
            eta0: f64::INFINITY,
            eta_final: f64::INFINITY,
            outer_iterations: 0,
            predicted_outer: 0,
            params,
            trace,
        });
    }
    state.eta = eta0(&params, centered.c_dual_norm);
    trace.eta0 = state.eta;
    let eta_start = state.eta;
    let target = 2.0 * params.theta / eps;
    let mut outer = 0;
    while state.eta < target {
        outer += 1;
        let (inner, nu) = drv.short_step(&mut state, outer, max_inner)?;
        let barrier_value = if settings.record_barrier_values {
            barrier_value(oracle.barrier(), inst, &state.x).ok()
        } else {
            None
        };
        trace.records.push(OuterRecord {
            outer,
            eta: state.eta,
            inner_iterations: inner,
            step_norm_q: nu,
            barrier_value,
            objective: inst.c.dot(&state.x),
            min_slack: min_slack(inst, &state.x),
            ledger: ledger.snapshot(),
        });
    }
    trace.backtracks = drv.backtracks;
    Ok(PathResult {
        x: state.x,
        eta0: eta_start,
        eta_final: state.eta,
        outer_iterations: outer,
        predicted_outer: params.predicted_outer(eps, eta_start),
        params,
        trace,
    })
}
