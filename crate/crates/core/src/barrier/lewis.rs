use nalgebra::{DMatrix, DVector};

use super::{lewis_vp, ln_det_pd, weighted_gram, Barrier, BarrierKind, OracleConfig};
use crate::error::{Error, Result};
use crate::lewis::{converged_lewis_weights, multiplicative_lewis_weights_as};
use crate::oracle::{CostKind, CostLedger};

/// Residual at which the exact Lewis weights are accepted.
const EXACT_TOL: f64 = 1e-12;

/// `ψ(x) = ½ ln det(AᵀS⁻¹W^{1−2/p}S⁻¹A)` with `W` the ℓp Lewis weights of
/// `S⁻¹A`; gradient `−AᵀS⁻¹W1`, surrogate `H̃_ψ = AᵀS⁻¹WS⁻¹A` and
/// `ϑ = d·v_p²`.
#[derive(Clone, Copy, Debug)]
pub struct LewisBarrier {
    pub p: f64,
}

impl LewisBarrier {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 4.0) || !p.is_finite() {
            return Err(Error::Domain(format!("Lewis barrier needs p >= 4, got {p}")));
        }
        Ok(LewisBarrier { p })
    }

    /// `max(4, ⌈ln n⌉)`.
    pub fn default_p(n: usize) -> f64 {
        (n.max(1) as f64).ln().ceil().max(4.0)
    }
}

impl Barrier for LewisBarrier {
    fn kind(&self) -> BarrierKind {
        BarrierKind::Lewis { p: self.p }
    }

    fn complexity(&self, n: usize, d: usize) -> f64 {
        d as f64 * lewis_vp(self.p, n).powi(2)
    }

    fn sandwich(&self) -> f64 {
        1.0 + self.p
    }

    fn hessian_cost(&self) -> CostKind {
        CostKind::HessianLewis
    }

    fn gradient_cost(&self) -> CostKind {
        CostKind::GradLewis
    }

    fn value_scaled(&self, scaled: &DMatrix<f64>, _s: &DVector<f64>) -> Result<f64> {
        let w = converged_lewis_weights(scaled, self.p, EXACT_TOL)?;
        let e = 1.0 - 2.0 / self.p;
        let u: Vec<f64> = w.iter().map(|x| x.powf(e)).collect();
        Ok(0.5 * ln_det_pd(&weighted_gram(scaled, &u))?)
    }

    fn exact_weights(&self, scaled: &DMatrix<f64>) -> Result<Vec<f64>> {
        converged_lewis_weights(scaled, self.p, EXACT_TOL)
    }

    fn approx_weights(
        &self,
        scaled: &DMatrix<f64>,
        delta: f64,
        cfg: &OracleConfig,
        seed: u64,
        ledger: &CostLedger,
    ) -> Result<Vec<f64>> {
        let r = multiplicative_lewis_weights_as(
            CostKind::LewisWeights,
            scaled,
            self.p,
            delta.min(0.5),
            &cfg.lewis,
            seed,
            ledger,
        )?;
        Ok(r.weights)
    }
}
