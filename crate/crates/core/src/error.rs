use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input outside valid domain: {0}")]
    InputDomain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical overflow in reaction {reaction}: {detail}")]
    Overflow { reaction: usize, detail: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("csv error at row {row}, column {column}: {msg}")]
    Csv { row: usize, column: String, msg: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("solver failure at pseudo-step {step} (worst cell {cell}): {msg}")]
    Solver { step: usize, cell: usize, msg: String },

    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
