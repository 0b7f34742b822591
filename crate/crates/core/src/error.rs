use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {order}-mode tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tensor shape: {0}")]
    InvalidShape(String),

    #[error("mode {0} appears more than once in a multi-mode product")]
    DuplicateMode(usize),

    #[error("block {block} out of range (partition has {count} blocks)")]
    BlockOutOfRange { block: usize, count: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("factor {mode} is not orthonormal (|P^H P - I|_F = {error:e})")]
    NotOrthonormal { mode: usize, error: f64 },

    #[error("SVD of a {rows}x{cols} matrix did not converge in {sweeps} sweeps")]
    SvdNoConvergence { rows: usize, cols: usize, sweeps: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("solver failed at iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("diagnostics were not recorded for this trace")]
    MissingDiagnostics,
}

impl Error {
    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Solver {
            iteration,
            source: alloc::boxed::Box::new(self),
        }
    }
}
