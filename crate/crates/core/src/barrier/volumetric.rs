use nalgebra::{DMatrix, DVector};

use super::{ln_det_pd, Barrier, BarrierKind, OracleConfig};
use crate::error::Result;
use crate::linalg::{scaled_leverage, DenseRows, LeverageScratch};
use crate::oracle::{CostKind, CostLedger, RowSource};
use crate::sketch::{repeated_halving_as, DirectEstimator, LeverageEstimator};

fn exact_leverage(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let rows = DenseRows::from_matrix(m);
    let mut out = vec![0.0; rows.n];
    scaled_leverage(&rows, &vec![1.0; rows.n], &mut out, &mut LeverageScratch::default())?;
    Ok(out)
}

/// `(1 ± delta)` leverage scores from a repeated-halving sketch at `delta`.
pub(crate) fn approx_leverage(
    m: &DMatrix<f64>,
    delta: f64,
    cfg: &OracleConfig,
    seed: u64,
    ledger: &CostLedger,
) -> Result<Vec<f64>> {
    let sk = repeated_halving_as(CostKind::LeverageScores, m, delta.min(1.0), seed, &cfg.sketch, ledger)?;
    let est = DirectEstimator::new(&sk.rows, cfg.sketch.kernel_tolerance);
    let mut buf = vec![0.0; m.ncols()];
    let out = (0..m.nrows())
        .map(|i| {
            m.fill_row(i, &mut buf);
            est.score(&buf)
        })
        .collect::<Vec<_>>();
    ledger.add_queries(CostKind::LeverageScores.label(), m.nrows() as u64);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(crate::error::Error::RankDeficient("leverage sketch missed a direction".into()));
    }
    Ok(out)
}

/// `V(x) = ½ ln det(AᵀS⁻²A)`, with `ϑ = √n·d` and surrogate
/// `H̃_V = AᵀS⁻¹ΣS⁻¹A ⪯ ∇²V ⪯ 5H̃_V`.
#[derive(Clone, Copy, Debug, Default)]
pub struct VolumetricBarrier;

impl Barrier for VolumetricBarrier {
    fn kind(&self) -> BarrierKind {
        BarrierKind::Volumetric
    }

    fn complexity(&self, n: usize, d: usize) -> f64 {
        (n as f64).sqrt() * d as f64
    }

    fn sandwich(&self) -> f64 {
        5.0
    }

    fn hessian_cost(&self) -> CostKind {
        CostKind::HessianVol
    }

    fn gradient_cost(&self) -> CostKind {
        CostKind::GradVol
    }

    fn value_scaled(&self, scaled: &DMatrix<f64>, _s: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * ln_det_pd(&scaled.tr_mul(scaled))?)
    }

    fn exact_weights(&self, scaled: &DMatrix<f64>) -> Result<Vec<f64>> {
        exact_leverage(scaled)
    }

    fn approx_weights(
        &self,
        scaled: &DMatrix<f64>,
        delta: f64,
        cfg: &OracleConfig,
        seed: u64,
        ledger: &CostLedger,
    ) -> Result<Vec<f64>> {
        approx_leverage(scaled, delta, cfg, seed, ledger)
    }
}

/// `V_ρ = V + ρF` with `ρ = (d−1)/(n−1)` and `ϑ = κ_h·√(nd)`.
#[derive(Clone, Copy, Debug)]
pub struct HybridBarrier {
    pub rho: f64,
    pub kappa_h: f64,
}

impl HybridBarrier {
    pub fn new(n: usize, d: usize, kappa_h: f64) -> Result<Self> {
        if n <= 1 {
            return Err(crate::error::Error::Domain("hybrid barrier needs n > 1".into()));
        }
        Ok(HybridBarrier { rho: (d as f64 - 1.0) / (n as f64 - 1.0), kappa_h })
    }
}

impl Barrier for HybridBarrier {
    fn kind(&self) -> BarrierKind {
        BarrierKind::Hybrid { rho: self.rho }
    }

    fn complexity(&self, n: usize, d: usize) -> f64 {
        self.kappa_h * ((n * d) as f64).sqrt()
    }

    fn sandwich(&self) -> f64 {
        5.0
    }

    fn hessian_cost(&self) -> CostKind {
        CostKind::HessianVol
    }

    fn gradient_cost(&self) -> CostKind {
        CostKind::GradVol
    }

    fn value_scaled(&self, scaled: &DMatrix<f64>, s: &DVector<f64>) -> Result<f64> {
        let v = 0.5 * ln_det_pd(&scaled.tr_mul(scaled))?;
        Ok(v - self.rho * s.iter().map(|x| x.ln()).sum::<f64>())
    }

    fn exact_weights(&self, scaled: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(exact_leverage(scaled)?.into_iter().map(|s| s + self.rho).collect())
    }

    fn approx_weights(
        &self,
        scaled: &DMatrix<f64>,
        delta: f64,
        cfg: &OracleConfig,
        seed: u64,
        ledger: &CostLedger,
    ) -> Result<Vec<f64>> {
        Ok(approx_leverage(scaled, delta, cfg, seed, ledger)?
            .into_iter()
            .map(|s| s + self.rho)
            .collect())
    }
}
