//! Reverse-mode automatic differentiation on dynamically built graphs.
//!
//! A [`Graph`] is a tape of eagerly evaluated ops, rebuilt for every
//! minibatch; [`Graph::backward`] walks it in reverse and deposits gradients
//! into the [`ParamSet`] the leaves were drawn from. [`ParamSet`] also owns
//! the per-parameter optimizer state used by [`ParamSet::adam_step`] and
//! [`ParamSet::rmsprop_step`], and round-trips to a compact binary snapshot
//! format. [`gradcheck`] compares analytic gradients against central finite
//! differences.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{apply_bn_updates, BnUpdate, Graph, VarId};
pub use params::{ParamEntry, ParamSet};
pub use tensor::{matmul, matmul_nt, matmul_tn, Tensor};

/// Epsilon added to the batch variance inside batch normalization.
pub const BN_EPS: f64 = 1e-5;
/// Fraction of the batch statistic blended into running statistics.
pub const BN_UPDATE: f64 = 0.1;

/// Errors surfaced by graph construction, backward passes, optimizer steps
/// and snapshot IO.
#[derive(Debug, thiserror::Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("backward needs a 1x1 scalar output, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("optimizer step without populated gradients; run backward first")]
    MissingGrads,
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("parameter '{0}' already exists")]
    DuplicateParam(String),
    #[error("op '{0}' produced a non-finite value")]
    NonFinite(&'static str),
    #[error("snapshot io: {0}")]
    SnapshotIo(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}
