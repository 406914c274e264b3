//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Two shapes that must agree (or broadcast) do not.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Inner dimensions of a matrix product differ.
    #[error("matmul inner dimension mismatch: {lhs:?} x {rhs:?}")]
    InnerDimMismatch { lhs: Vec<usize>, rhs: Vec<usize> },

    /// A shape is invalid for the requested operation (bad rank, zero dim,
    /// non-integer convolution output, reshape size mismatch, ...).
    #[error("invalid shape for {op}: {msg}")]
    InvalidShape { op: &'static str, msg: String },

    #[error("invalid argument for {op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    /// Configuration file / key errors (unknown key, parse failure, bad value).
    #[error("config error: {0}")]
    Config(String),

    /// Tensor archive decode/encode failure.
    #[error("archive error: {0}")]
    Archive(String),

    /// A loss component or gradient became non-finite.
    #[error("numerical failure in {component}: {msg}")]
    Numerical { component: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_shape(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidShape { op, msg: msg.into() }
    }

    pub fn invalid_arg(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { op, msg: msg.into() }
    }

    /// Exit code the CLI maps this error to: 2 for numerical failures,
    /// 1 for everything else (validation, IO, config).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 2,
            _ => 1,
        }
    }
}
