use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subroutines with a modeled quantum query count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostKind {
    SpectralApprox,
    LeverageScores,
    LewisWeights,
    MatVec,
    HessianLog,
    HessianVol,
    HessianLewis,
    GradLog,
    GradVol,
    GradLewis,
}

impl CostKind {
    pub const ALL: [CostKind; 10] = [
        CostKind::SpectralApprox,
        CostKind::LeverageScores,
        CostKind::LewisWeights,
        CostKind::MatVec,
        CostKind::HessianLog,
        CostKind::HessianVol,
        CostKind::HessianLewis,
        CostKind::GradLog,
        CostKind::GradVol,
        CostKind::GradLewis,
    ];

    /// Default ledger label.
    pub fn label(self) -> &'static str {
        match self {
            CostKind::SpectralApprox => "spectral_approx",
            CostKind::LeverageScores => "leverage_scores",
            CostKind::LewisWeights => "lewis_weights",
            CostKind::MatVec => "matvec",
            CostKind::HessianLog => "hessian_log",
            CostKind::HessianVol => "hessian_vol",
            CostKind::HessianLewis => "hessian_lewis",
            CostKind::GradLog => "grad_log",
            CostKind::GradVol => "grad_vol",
            CostKind::GradLewis => "grad_lewis",
        }
    }
}

/// Leading-order modeled quantum row-query count (polylog factors dropped,
/// unit constants).
///
/// | kind | formula |
/// |---|---|
/// | SpectralApprox, LeverageScores, HessianLog, HessianVol | √(nd)/ε |
/// | LewisWeights, HessianLewis | √n·d^{3/2}/ε² |
/// | MatVec, GradLog, GradVol | √n·d/ε |
/// | GradLewis | √n·d^{5/2}/ε² |
pub fn modeled_quantum_cost(kind: CostKind, n: usize, d: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    if d == 0 || n < d {
        return Err(Error::Domain(format!("need n >= d >= 1, got n={n}, d={d}")));
    }
    let (n, d) = (n as f64, d as f64);
    Ok(match kind {
        CostKind::SpectralApprox
        | CostKind::LeverageScores
        | CostKind::HessianLog
        | CostKind::HessianVol => (n * d).sqrt() / eps,
        CostKind::LewisWeights | CostKind::HessianLewis => n.sqrt() * d.powf(1.5) / (eps * eps),
        CostKind::MatVec | CostKind::GradLog | CostKind::GradVol => n.sqrt() * d / eps,
        CostKind::GradLewis => n.sqrt() * d.powf(2.5) / (eps * eps),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub classical_row_queries: u64,
    pub modeled_quantum_row_queries: f64,
    #[serde(skip)]
    pub wall_time: Duration,
}

pub type LedgerSnapshot = BTreeMap<String, LedgerEntry>;

/// Per-label query counters, shared by reference across subroutines.
#[derive(Debug, Default)]
pub struct CostLedger {
    inner: Mutex<LedgerSnapshot>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn with<R>(&self, label: &str, f: impl FnOnce(&mut LedgerEntry) -> R) -> R {
        let mut map = self.inner.lock().expect("ledger lock poisoned");
        f(map.entry(label.to_string()).or_default())
    }

    pub fn add_queries(&self, label: &str, k: u64) {
        self.with(label, |e| e.classical_row_queries += k);
    }

    pub fn add_modeled(&self, label: &str, q: f64) {
        self.with(label, |e| e.modeled_quantum_row_queries += q);
    }

    pub fn add_time(&self, label: &str, t: Duration) {
        self.with(label, |e| e.wall_time += t);
    }

    /// Charges the modeled cost of `kind` at `(n, d, eps)` to its default label.
    pub fn charge_modeled(&self, kind: CostKind, n: usize, d: usize, eps: f64) -> Result<()> {
        let q = modeled_quantum_cost(kind, n, d, eps)?;
        self.add_modeled(kind.label(), q);
        Ok(())
    }

    pub fn entry(&self, label: &str) -> LedgerEntry {
        let map = self.inner.lock().expect("ledger lock poisoned");
        map.get(label).cloned().unwrap_or_default()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        self.inner.lock().expect("ledger lock poisoned").clone()
    }

    pub fn total_classical(&self) -> u64 {
        let map = self.inner.lock().expect("ledger lock poisoned");
        map.values().map(|e| e.classical_row_queries).sum()
    }
}

impl Clone for CostLedger {
    fn clone(&self) -> Self {
        CostLedger { inner: Mutex::new(self.snapshot()) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modeled_formulas() {
        let q = modeled_quantum_cost(CostKind::SpectralApprox, 1_000_000, 100, 1.0).unwrap();
        assert!((q - 1e4).abs() < 1e-6);
        let q = modeled_quantum_cost(CostKind::GradLog, 10_000, 10, 1.0).unwrap();
        assert!((q - 1e3).abs() < 1e-9);
        let q = modeled_quantum_cost(CostKind::SpectralApprox, 7, 7, 1.0).unwrap();
        assert!((q - 7.0).abs() < 1e-12);
        assert!(modeled_quantum_cost(CostKind::MatVec, 10, 2, 0.0).is_err());
        assert!(modeled_quantum_cost(CostKind::MatVec, 10, 2, 1.5).is_err());
    }

    #[test]
    fn snapshot_omits_wall_time_from_json() {
        let l = CostLedger::new();
        l.add_queries("x", 3);
        l.add_time("x", Duration::from_millis(5));
        let s = serde_json::to_string(&l.snapshot()).unwrap();
        assert_eq!(s, r#"{"x":{"classical_row_queries":3,"modeled_quantum_row_queries":0.0}}"#);
    }
}
