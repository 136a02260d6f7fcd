//! Spectral approximation of `AᵀA` by importance row sampling.

mod halving;
mod leverage;

pub use halving::{repeated_halving, repeated_halving_as};
pub use leverage::{
    build_estimator, leverage_scores_exact, DirectEstimator, JlEstimator, LeverageEstimator,
    ScoreMode,
};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gram;
use crate::oracle::RowSource;
use crate::seed;

/// Tunables shared by every sampling routine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Oversampling constant `c` in `p_i = min{1, c·w_i·log d/ε²}`.
    pub c_const: f64,
    /// `β` in the JL sketch dimension `⌈β ln n/ε²⌉`.
    pub jl_beta: f64,
    /// Relative threshold of the row-space membership test.
    pub kernel_tolerance: f64,
    pub mode: ScoreMode,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig { c_const: 8.0, jl_beta: 12.0, kernel_tolerance: 1e-8, mode: ScoreMode::Auto }
    }
}

impl SketchConfig {
    /// `log d`, floored at 1 so that one-column problems still sample.
    pub fn log_factor(d: usize) -> f64 {
        (d as f64).ln().max(1.0)
    }

    pub fn probability(&self, w: f64, d: usize, eps: f64) -> f64 {
        if w.is_infinite() {
            return 1.0;
        }
        (self.c_const * w * Self::log_factor(d) / (eps * eps)).min(1.0)
    }

    /// Row count at or below which sampling cannot help.
    pub fn shortcut_rows(&self, d: usize, eps: f64) -> usize {
        (self.c_const * d as f64 * Self::log_factor(d) / (eps * eps)).ceil() as usize
    }
}

/// Nonnegative sampling weights; `∞` forces a row in.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Domain(format!("weight {i} is {}", values[i])));
        }
        Ok(WeightVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Rescaled row subset `B̃` with its provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSketch {
    #[serde(skip)]
    pub rows: DMatrix<f64>,
    pub source_indices: Vec<usize>,
    pub scales: Vec<f64>,
    pub epsilon: f64,
}

impl SpectralSketch {
    /// Rebuilds the rows from the source matrix, e.g. after deserializing.
    pub fn from_provenance(
        src: &dyn RowSource,
        source_indices: Vec<usize>,
        scales: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        if source_indices.len() != scales.len() {
            return Err(Error::Shape("indices and scales differ in length".into()));
        }
        let d = src.n_cols();
        let mut data = Vec::with_capacity(source_indices.len() * d);
        let mut buf = vec![0.0; d];
        for (&i, &s) in source_indices.iter().zip(&scales) {
            if i >= src.n_rows() {
                return Err(Error::RowOutOfRange { index: i, rows: src.n_rows() });
            }
            src.fill_row(i, &mut buf);
            data.extend(buf.iter().map(|v| v * s));
        }
        Ok(SpectralSketch {
            rows: DMatrix::from_row_slice(source_indices.len(), d, &data),
            source_indices,
            scales,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        gram(&self.rows)
    }
}

/// Accumulates kept rows while sampling.
pub(crate) struct SketchBuilder {
    d: usize,
    data: Vec<f64>,
    indices: Vec<usize>,
    scales: Vec<f64>,
}

impl SketchBuilder {
    pub(crate) fn new(d: usize) -> Self {
        SketchBuilder { d, data: Vec::new(), indices: Vec::new(), scales: Vec::new() }
    }

    pub(crate) fn push(&mut self, index: usize, row: &[f64], scale: f64) {
        self.indices.push(index);
        self.scales.push(scale);
        self.data.extend(row.iter().map(|v| v * scale));
    }

    pub(crate) fn finish(self, epsilon: f64) -> SpectralSketch {
        let m = self.indices.len();
        SpectralSketch {
            rows: DMatrix::from_row_slice(m, self.d, &self.data),
            source_indices: self.indices,
            scales: self.scales,
            epsilon,
        }
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in (0, 1], got {eps}")))
    }
}

/// Keeps row `i` independently with probability `p_i`, rescaled by `1/√p_i`.
pub fn weighted_subsample(
    src: &dyn RowSource,
    w: &WeightVector,
    eps: f64,
    cfg: &SketchConfig,
    seed_value: u64,
) -> Result<SpectralSketch> {
    check_eps(eps)?;
    let (n, d) = (src.n_rows(), src.n_cols());
    if w.values().len() != n {
        return Err(Error::Shape(format!("{} weights for {n} rows", w.values().len())));
    }
    let mut rng = seed::rng(seed::derive(seed_value, "weighted_subsample"));
    let mut out = SketchBuilder::new(d);
    let mut buf = vec![0.0; d];
    for (i, &wi) in w.values().iter().enumerate() {
        let p = cfg.probability(wi, d, eps);
        let u: f64 = rng.random();
        if p > 0.0 && u < p {
            src.fill_row(i, &mut buf);
            out.push(i, &buf, 1.0 / p.sqrt());
        }
    }
    Ok(out.finish(eps))
}
