use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} needs {required}, limit is {limit}")]
    Capacity {
        what: &'static str,
        required: usize,
        limit: usize,
    },

    /// Newton or eigensolver iteration failed to reach tolerance.
    #[error("no convergence in {context}: last residual {residual:e}")]
    NonConvergence { context: String, residual: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("qasm: {0}")]
    Qasm(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
