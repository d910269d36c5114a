//! Minimal reverse-mode differentiation engine with the layers the two
//! streams need, plus Adam, the step learning-rate schedule and the
//! parameter checkpoint format.

mod adam;
mod checkpoint;
mod graph;
mod lstm;
mod params;
mod schedule;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use graph::{softmax, Graph, Mode, Var};
pub use lstm::{lstm_step, LstmVars};
pub use params::{Param, ParamStore};
pub use schedule::{lr_at, LrSchedule};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: {msg}")]
    Shape { op: &'static str, msg: String },
    #[error("loss must be a single value, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("class index {index} out of range for {classes} classes")]
    Target { index: usize, classes: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(NnError::Shape { op, msg: msg.into() })
}
