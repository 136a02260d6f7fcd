#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use tall_lp::barrier::{barrier_value, hessian_fd, hessian_surrogate_exact, Barrier, BarrierKind};
use tall_lp::ipm::{IpmObserver, StepEvent};
use tall_lp::oracle::LpInstance;
use tall_lp::Result;

/// Dense barrier Hessian: the surrogate is exact for the log barrier,
/// otherwise a central difference of the exact gradient.
pub fn true_hessian(b: &dyn Barrier, inst: &LpInstance, x: &DVector<f64>) -> DMatrix<f64> {
    if b.kind() == BarrierKind::Log {
        hessian_surrogate_exact(b, inst, x).unwrap()
    } else {
        // Keep the stencil well inside the feasible region.
        let s = &inst.a * x - &inst.b;
        let reach = (0..inst.n).map(|i| s[i] / inst.a.row(i).norm()).fold(f64::INFINITY, f64::min);
        hessian_fd(b, inst, x, (1e-6 * (1.0 + x.norm())).min(1e-3 * reach)).unwrap()
    }
}

/// Audits every damped short step against the progress bound
/// `f_η(x + δd̃) ≤ f_η(x) − ‖d̃‖_Q²/(16C²)` and the step safety bound
/// `δ‖d̃‖_x < 1/2`.
pub struct DescentAudit<'a> {
    pub inst: &'a LpInstance,
    pub barrier: &'a dyn Barrier,
    pub alpha: f64,
    pub zeta: f64,
    pub step_delta: f64,
    /// Steps where the progress bound applies.
    pub checked: usize,
    /// Steps skipped because `ζ > ‖d̃‖_x/C` or the step was shortened.
    pub skipped: usize,
    pub violations: Vec<String>,
    pub unsafe_steps: usize,
}

impl<'a> DescentAudit<'a> {
    pub fn new(inst: &'a LpInstance, barrier: &'a dyn Barrier, alpha: f64, zeta: f64, step_delta: f64) -> Self {
        DescentAudit { inst, barrier, alpha, zeta, step_delta, checked: 0, skipped: 0, violations: Vec::new(), unsafe_steps: 0 }
    }

    fn f(&self, eta: f64, x: &DVector<f64>) -> f64 {
        eta * self.inst.c.dot(x) + barrier_value(self.barrier, self.inst, x).unwrap()
    }
}

impl IpmObserver for DescentAudit<'_> {
    fn on_step(&mut self, e: &StepEvent<'_>) -> Result<()> {
        let (Some(t), Some(next)) = (e.step, e.x_next) else { return Ok(()) };
        if e.outer == 0 || e.step_norm_q < self.alpha {
            return Ok(());
        }
        let h = true_hessian(self.barrier, self.inst, e.x);
        let norm_x = e.direction.dot(&(&h * e.direction)).max(0.0).sqrt();
        if t * norm_x >= 0.5 {
            self.unsafe_steps += 1;
        }
        if self.zeta > norm_x / e.c_factor || t < self.step_delta {
            self.skipped += 1;
            return Ok(());
        }
        self.checked += 1;
        let before = self.f(e.eta, e.x);
        let after = self.f(e.eta, next);
        let need = e.step_norm_q.powi(2) / (16.0 * e.c_factor * e.c_factor);
        if before - after < need - 1e-9 * (1.0 + before.abs()) {
            self.violations.push(format!(
                "outer {} inner {}: decrease {:e} < {:e}",
                e.outer,
                e.inner,
                before - after,
                need
            ));
        }
        Ok(())
    }
}

/// Optimal value from an exact log-barrier run with gap `2ϑ/η ≤ 1e-8`.
pub fn reference_value(inst: &LpInstance) -> f64 {
    use tall_lp::barrier::LogBarrier;
    use tall_lp::ipm::{path_follow, ExactOracle, IpmSettings, NoObserver};
    use tall_lp::oracle::CostLedger;
    let oracle = ExactOracle::new(Box::new(LogBarrier));
    let settings = IpmSettings { record_barrier_values: false, ..Default::default() };
    let r = path_follow(inst, &oracle, 1e-8, &settings, 0, &CostLedger::new(), &mut NoObserver).unwrap();
    inst.c.dot(&r.x)
}
