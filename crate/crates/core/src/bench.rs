//! Sweeps over `(n, d)` grids comparing measured classical row queries with
//! the modeled quantum counts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::barrier::{gradient_estimate, LogBarrier, OracleConfig};
use crate::error::{Error, Result};
use crate::matvec::SamplingPolicy;
use crate::lewis::{multiplicative_lewis_weights, LewisConfig};
use crate::oracle::{gen_random_tall_lp, modeled_quantum_cost, CostKind, CostLedger};
use crate::seed;
use crate::sketch::{repeated_halving, SketchConfig};

/// Benchmarked subroutines with the modeled cost each is compared to.
pub const SUBROUTINES: [(&str, CostKind); 3] = [
    ("spectral_approx", CostKind::SpectralApprox),
    ("log_gradient", CostKind::GradLog),
    ("lewis_weights", CostKind::LewisWeights),
];

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchCell {
    pub measured_classical_row_queries: u64,
    pub modeled_quantum_row_queries: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub subroutines: BTreeMap<String, BenchCell>,
}

/// Log-log slope of one curve, with the exponent it should have.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SlopeFit {
    pub subroutine: String,
    /// `"measured"` or `"modeled"`.
    pub series: String,
    /// Axis the slope is taken along (`"n"` or `"d"`).
    pub axis: String,
    /// Value of the other axis, held fixed.
    pub fixed: usize,
    pub slope: f64,
    pub expected: f64,
    pub within_10_percent: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slopes: Vec<SlopeFit>,
}

fn gaussian(n: usize, d: usize, seed_value: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed_value);
    DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn modeled_d_exponent(kind: CostKind) -> f64 {
    match kind {
        CostKind::SpectralApprox => 0.5,
        CostKind::GradLog => 1.0,
        _ => 1.5,
    }
}

fn measure(name: &str, n: usize, d: usize, eps: f64, seed_value: u64) -> Result<u64> {
    let ledger = CostLedger::new();
    let s = seed::derive(seed::derive_indexed(seed::derive_indexed(seed_value, "bench.n", n as u64), "bench.d", d as u64), name);
    match name {
        "spectral_approx" => {
            let a = gaussian(n, d, seed::derive(s, "matrix"));
            repeated_halving(&a, eps, s, &SketchConfig::default(), &ledger)?;
        }
        "log_gradient" => {
            let inst = gen_random_tall_lp(n, d, s)?;
            let x = inst.x0.clone().unwrap_or_else(|| DVector::zeros(d));
            // Sample even when the direct sum is cheaper, so the count reflects
            // the estimator itself.
            let mut cfg = OracleConfig::default();
            cfg.matvec.policy = SamplingPolicy::MonteCarlo;
            gradient_estimate(&LogBarrier, &inst, &x, eps, &cfg, s, &ledger)?;
        }
        "lewis_weights" => {
            let a = gaussian(n, d, seed::derive(s, "matrix"));
            multiplicative_lewis_weights(&a, 4.0, eps.min(0.5), &LewisConfig::default(), s, &ledger)?;
        }
        other => return Err(Error::UnknownStrategy { kind: "bench subroutine", name: other.into() }),
    }
    Ok(ledger.total_classical())
}

/// Runs every subroutine on every grid point and fits log-log slopes.
pub fn sweep(n_grid: &[usize], d_grid: &[usize], eps: f64, seed_value: u64) -> Result<BenchReport> {
    if n_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::Domain("bench grids must be nonempty".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    for &n in n_grid {
        for &d in d_grid {
            if d == 0 || n < 2 * d {
                return Err(Error::Domain(format!("grid point n={n}, d={d} needs n >= 2d >= 2")));
            }
        }
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        for &d in d_grid {
            let mut subroutines = BTreeMap::new();
            for (name, kind) in SUBROUTINES {
                let measured = measure(name, n, d, eps, seed_value)?;
                let modeled = modeled_quantum_cost(kind, n, d, if kind == CostKind::LewisWeights { eps.min(0.5) } else { eps })?;
                subroutines.insert(
                    name.to_string(),
                    BenchCell { measured_classical_row_queries: measured, modeled_quantum_row_queries: modeled },
                );
            }
            rows.push(BenchRow { n, d, epsilon: eps, subroutines });
        }
    }

    let mut ns: Vec<usize> = n_grid.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut ds: Vec<usize> = d_grid.to_vec();
    ds.sort_unstable();
    ds.dedup();
    let mut slopes = Vec::new();
    let cell = |n: usize, d: usize, name: &str| -> &BenchCell {
        &rows.iter().find(|r| r.n == n && r.d == d).expect("grid row").subroutines[name]
    };
    for (name, kind) in SUBROUTINES {
        let mut push = |series: &str, axis: &str, fixed: usize, pts: Vec<(f64, f64)>, expected: f64| {
            let slope = loglog_slope(&pts);
            slopes.push(SlopeFit {
                subroutine: name.to_string(),
                series: series.to_string(),
                axis: axis.to_string(),
                fixed,
                slope,
                expected,
                within_10_percent: (slope - expected).abs() <= 0.1 * expected,
            });
        };
        if ns.len() >= 2 {
            for &d in &ds {
                let meas = ns.iter().map(|&n| (n as f64, cell(n, d, name).measured_classical_row_queries as f64)).collect();
                push("measured", "n", d, meas, 1.0);
                let model = ns.iter().map(|&n| (n as f64, cell(n, d, name).modeled_quantum_row_queries)).collect();
                push("modeled", "n", d, model, 0.5);
            }
        }
        if ds.len() >= 2 {
            for &n in &ns {
                let model = ds.iter().map(|&d| (d as f64, cell(n, d, name).modeled_quantum_row_queries)).collect();
                push("modeled", "d", n, model, modeled_d_exponent(kind));
            }
        }
    }
    Ok(BenchReport { rows, slopes })
}
