use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barrier::{
    exact_model, gradient_estimate_scaled, gradient_weight_precision, hessian_sketch_scaled,
    scaled_rows, slacks, Barrier, OracleConfig,
};
use crate::error::{Error, Result};
use crate::oracle::{CostLedger, LpInstance};
use crate::seed;

/// Local quadratic model at a point: `Q ⪯ ∇²f ⪯ C·Q` and `g̃ ≈ ∇f`.
#[derive(Clone, Debug)]
pub struct LocalModel {
    pub q: DMatrix<f64>,
    pub g: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Exact,
    Sketched,
}

impl OracleMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exact" => Ok(OracleMode::Exact),
            "sketched" => Ok(OracleMode::Sketched),
            other => Err(Error::UnknownStrategy { kind: "oracle mode", name: other.into() }),
        }
    }
}

/// Supplies approximate Newton systems to the path follower.
pub trait NewtonOracle {
    fn barrier(&self) -> &dyn Barrier;
    fn mode(&self) -> OracleMode;
    /// `C` with `Q ⪯ ∇²f ⪯ C·Q`.
    fn c_factor(&self) -> f64;
    /// Gradient accuracy `ζ` in the inverse local norm.
    fn zeta(&self) -> f64;
    fn local_model(&self, inst: &LpInstance, x: &DVector<f64>, seed: u64, ledger: &CostLedger) -> Result<LocalModel>;
}

/// Dense surrogate Hessian and exact gradient.
pub struct ExactOracle {
    barrier: Box<dyn Barrier>,
}

impl ExactOracle {
    pub fn new(barrier: Box<dyn Barrier>) -> Self {
        ExactOracle { barrier }
    }
}

impl NewtonOracle for ExactOracle {
    fn barrier(&self) -> &dyn Barrier {
        self.barrier.as_ref()
    }

    fn mode(&self) -> OracleMode {
        OracleMode::Exact
    }

    fn c_factor(&self) -> f64 {
        self.barrier.sandwich()
    }

    fn zeta(&self) -> f64 {
        0.0
    }

    fn local_model(&self, inst: &LpInstance, x: &DVector<f64>, _seed: u64, ledger: &CostLedger) -> Result<LocalModel> {
        ledger.add_queries("exact_oracle", inst.n as u64);
        let (q, g) = exact_model(self.barrier.as_ref(), inst, x)?;
        Ok(LocalModel { q, g })
    }
}

/// Sketched Hessian at accuracy `ε_H`, rescaled by `1 − ε_H` so that
/// `Q ⪯ H̃`, and a `ζ`-accurate gradient estimate.
pub struct SketchedOracle {
    barrier: Box<dyn Barrier>,
    pub eps_h: f64,
    pub zeta: f64,
    pub cfg: OracleConfig,
}

impl SketchedOracle {
    pub fn new(barrier: Box<dyn Barrier>, eps_h: f64, zeta: f64, cfg: OracleConfig) -> Result<Self> {
        if !(eps_h > 0.0 && eps_h < 1.0) {
            return Err(Error::Domain(format!("Hessian accuracy must lie in (0, 1), got {eps_h}")));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::Domain(format!("zeta must lie in (0, 1], got {zeta}")));
        }
        Ok(SketchedOracle { barrier, eps_h, zeta, cfg })
    }
}

impl NewtonOracle for SketchedOracle {
    fn barrier(&self) -> &dyn Barrier {
        self.barrier.as_ref()
    }

    fn mode(&self) -> OracleMode {
        OracleMode::Sketched
    }

    fn c_factor(&self) -> f64 {
        self.barrier.sandwich() * (1.0 + self.eps_h) / (1.0 - self.eps_h)
    }

    fn zeta(&self) -> f64 {
        self.zeta
    }

    fn local_model(&self, inst: &LpInstance, x: &DVector<f64>, seed_value: u64, ledger: &CostLedger) -> Result<LocalModel> {
        let b = self.barrier.as_ref();
        let s = slacks(inst, x)?;
        let m = scaled_rows(&inst.a, &s);
        // One weight estimate at the tighter of the two precisions serves both
        // the Hessian and the gradient.
        let weights = if b.unit_weights() {
            None
        } else {
            let delta = (self.eps_h / 3.0).min(gradient_weight_precision(self.zeta, inst.d, self.cfg.kappa_g));
            Some(b.approx_weights(&m, delta, &self.cfg, seed::derive(seed_value, "oracle.weights"), ledger)?)
        };
        let h = hessian_sketch_scaled(
            b,
            &m,
            self.eps_h,
            &self.cfg,
            seed::derive(seed_value, "oracle.hessian"),
            ledger,
            weights.as_deref(),
        )?;
        let g = gradient_estimate_scaled(
            b,
            &m,
            self.zeta,
            &self.cfg,
            seed::derive(seed_value, "oracle.gradient"),
            ledger,
            weights.as_deref(),
        )?;
        Ok(LocalModel { q: h.q * (1.0 - self.eps_h), g })
    }
}

/// Builds the oracle for `mode` around `barrier`.
pub fn build_oracle(
    mode: OracleMode,
    barrier: Box<dyn Barrier>,
    eps_h: f64,
    zeta: f64,
    cfg: OracleConfig,
) -> Result<Box<dyn NewtonOracle>> {
    Ok(match mode {
        OracleMode::Exact => Box::new(ExactOracle::new(barrier)),
        OracleMode::Sketched => Box::new(SketchedOracle::new(barrier, eps_h, zeta, cfg)?),
    })
}
