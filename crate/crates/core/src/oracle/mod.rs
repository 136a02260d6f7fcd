//! Row-query access to LP data, cost accounting, the lazy halving chain and
//! instance generators.

mod chain;
mod generate;
mod io;
mod ledger;

pub use chain::HalvingChain;
pub use generate::{gen_random_tall_lp, gen_search_hard_matrix, unit_interval};
pub use io::{load_instance, parse_instance, parse_instance_json, parse_instance_text};
pub use ledger::{modeled_quantum_cost, CostKind, CostLedger, LedgerEntry, LedgerSnapshot};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// `min cᵀx  s.t.  Ax ≥ b` with an optional strictly feasible start.
#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance {
    pub n: usize,
    pub d: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub x0: Option<DVector<f64>>,
    /// Maximum number of nonzeros in a row of `a`.
    pub row_sparsity: usize,
}

impl LpInstance {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        x0: Option<DVector<f64>>,
    ) -> Result<Self> {
        let (n, d) = a.shape();
        if d == 0 || n < d {
            return Err(Error::Shape(format!("need n >= d >= 1, got n={n}, d={d}")));
        }
        if b.len() != n || c.len() != d {
            return Err(Error::Shape(format!(
                "b has length {} (want {n}), c has length {} (want {d})",
                b.len(),
                c.len()
            )));
        }
        let finite = a.iter().chain(b.iter()).chain(c.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("instance contains non-finite entries".into()));
        }
        if let Some(x) = &x0 {
            if x.len() != d {
                return Err(Error::Shape(format!("x0 has length {}, want {d}", x.len())));
            }
            let s = &a * x - &b;
            if let Some((row, &slack)) = s.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::InfeasibleInterior { row, slack });
            }
        }
        let row_sparsity = (0..n)
            .map(|i| a.row(i).iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap_or(0);
        Ok(LpInstance { n, d, a, b, c, x0, row_sparsity })
    }
}

/// Read access to the rows of a tall matrix, one row at a time.
pub trait RowSource: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Copies row `i` into `out` (length `n_cols`).
    fn fill_row(&self, i: usize, out: &mut [f64]);

    fn to_matrix(&self) -> DMatrix<f64> {
        let (n, d) = (self.n_rows(), self.n_cols());
        let mut m = DMatrix::zeros(n, d);
        let mut buf = vec![0.0; d];
        for i in 0..n {
            self.fill_row(i, &mut buf);
            for j in 0..d {
                m[(i, j)] = buf[j];
            }
        }
        m
    }
}

impl RowSource for DMatrix<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }
    fn n_cols(&self) -> usize {
        self.ncols()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self[(i, j)];
        }
    }
}

/// The view `diag(scale)·A`, used for `S⁻¹A` and `W^{1/2}S⁻¹A`.
#[derive(Clone, Debug)]
pub struct ScaledRows<'a> {
    pub base: &'a DMatrix<f64>,
    pub scale: Vec<f64>,
}

impl<'a> ScaledRows<'a> {
    pub fn new(base: &'a DMatrix<f64>, scale: Vec<f64>) -> Self {
        debug_assert_eq!(base.nrows(), scale.len());
        ScaledRows { base, scale }
    }
}

impl RowSource for ScaledRows<'_> {
    fn n_rows(&self) -> usize {
        self.base.nrows()
    }
    fn n_cols(&self) -> usize {
        self.base.ncols()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let s = self.scale[i];
        for (j, o) in out.iter_mut().enumerate() {
            *o = s * self.base[(i, j)];
        }
    }
}

/// Reads row `i` (0-based) of `A` and `b_i`, charging one query to `label`.
pub fn row_query(
    inst: &LpInstance,
    i: usize,
    ledger: &CostLedger,
    label: &str,
) -> Result<(Vec<f64>, f64)> {
    if i >= inst.n {
        return Err(Error::RowOutOfRange { index: i, rows: inst.n });
    }
    ledger.add_queries(label, 1);
    Ok((inst.a.row(i).iter().cloned().collect(), inst.b[i]))
}

/// Serializable description of an instance (row-major `A`).
#[derive(Serialize)]
struct InstanceJson<'a> {
    n: usize,
    d: usize,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: &'a [f64],
    c: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<&'a [f64]>,
}

impl LpInstance {
    /// JSON in the ingestion format.
    pub fn to_json(&self) -> String {
        let mut a = Vec::with_capacity(self.n * self.d);
        for i in 0..self.n {
            a.extend(self.a.row(i).iter());
        }
        let doc = InstanceJson {
            n: self.n,
            d: self.d,
            a,
            b: self.b.as_slice(),
            c: self.c.as_slice(),
            x0: self.x0.as_ref().map(|x| x.as_slice()),
        };
        serde_json::to_string(&doc).expect("instance serializes")
    }
}
