//! Minimal numeric core: dense row-major f64 matrices, a reverse-mode
//! autodiff tape, SGD with momentum, finite-difference gradient checking,
//! and a versioned binary checkpoint container.

mod checkpoint;
mod gradcheck;
mod matrix;
mod optim;
mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{check_gradients, finite_difference_grads};
pub use matrix::{sorted_sum, Matrix};
pub use optim::{Param, ParamId, ParamStore};
pub use tape::{NodeId, Tape};

use thiserror::Error;

/// Errors produced by the numeric core.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: empty input list")]
    EmptyInput { op: &'static str },
    #[error("softmax_cross_entropy: target {target} out of range for {classes} classes (row {row})")]
    TargetOutOfRange {
        row: usize,
        target: usize,
        classes: usize,
    },
    #[error("backward: tape already consumed; re-record the forward pass before calling backward again")]
    DoubleBackward,
    #[error("backward: loss node must be 1x1, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("check_gradients: forward pass is non-deterministic (two evaluations differ: {a} vs {b})")]
    NonDeterministicForward { a: f64, b: f64 },
    #[error("check_gradients: epsilon {0} outside supported range [1e-6, 1e-4]")]
    BadEpsilon(f64),
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NumError>;
