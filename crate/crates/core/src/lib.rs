//! Interior point solver for tall linear programs `min cᵀx s.t. Ax ≥ b`
//! (`n ≫ d`), whose Newton steps use sketched Hessians (leverage score and
//! Lewis weight row sampling) and sampled gradient estimates.
//!
//! Every subroutine charges a [`oracle::CostLedger`] with the classical row
//! queries it made and the leading-order quantum query count modeled for it.

// `!(x > 0.0)` is used on purpose (it also rejects NaN); index loops are the
// clearest form for the small dense kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod barrier;
pub mod bench;
pub mod error;
pub mod ipm;
pub mod lewis;
pub mod linalg;
pub mod matvec;
pub mod oracle;
pub mod seed;
pub mod sketch;

pub use error::{Error, Result};
