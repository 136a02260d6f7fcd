use nalgebra::{DMatrix, DVector};

use super::{Barrier, BarrierKind, OracleConfig};
use crate::error::Result;
use crate::oracle::{CostKind, CostLedger};

/// `F(x) = −Σ ln s_i`, with `ϑ = n`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LogBarrier;

impl Barrier for LogBarrier {
    fn kind(&self) -> BarrierKind {
        BarrierKind::Log
    }

    fn complexity(&self, n: usize, _d: usize) -> f64 {
        n as f64
    }

    fn sandwich(&self) -> f64 {
        1.0
    }

    fn hessian_cost(&self) -> CostKind {
        CostKind::HessianLog
    }

    fn gradient_cost(&self) -> CostKind {
        CostKind::GradLog
    }

    fn unit_weights(&self) -> bool {
        true
    }

    fn value_scaled(&self, _scaled: &DMatrix<f64>, s: &DVector<f64>) -> Result<f64> {
        Ok(-s.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn exact_weights(&self, scaled: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(vec![1.0; scaled.nrows()])
    }

    fn approx_weights(
        &self,
        scaled: &DMatrix<f64>,
        _delta: f64,
        _cfg: &OracleConfig,
        _seed: u64,
        _ledger: &CostLedger,
    ) -> Result<Vec<f64>> {
        Ok(vec![1.0; scaled.nrows()])
    }
}
