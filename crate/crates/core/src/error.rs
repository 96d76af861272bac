use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// The scaled low part does not fit in binary16.
    #[error("overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("no feasible block plan for {m}x{k}x{n}")]
    NoFeasiblePlan { m: usize, k: usize, n: usize },

    /// The reference result has zero norm, so a relative error is undefined.
    #[error("degenerate reference: ||C_true||_2 = 0")]
    Degenerate,

    /// An element-wise failure inside a matrix operation.
    #[error("element ({row}, {col}): {source}")]
    AtElement {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Strips `AtElement` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtElement { source, .. } => source.root(),
            e => e,
        }
    }
}
