use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("grid mismatch: {0} vs {1} nodes")]
    GridMismatch(usize, usize),
    #[error("input not real-valued (imaginary part {0:.3e})")]
    NotReal(f64),
    #[error("under-resolved field: tail energy {0:.3e}")]
    Resolution(f64),
    #[error("hamiltonian structure violated in relation `{relation}` (residual {residual:.3e})")]
    Structure { relation: String, residual: f64 },
    #[error("degenerate operator: {0}")]
    Degeneracy(String),
    #[error("diffeomorphism not invertible: {0}")]
    Invertibility(String),
    #[error("fixed point did not contract: {0}")]
    Contraction(String),
    #[error("smallness condition failed: {0}")]
    Smallness(String),
    #[error("accuracy target missed: {0}")]
    Accuracy(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("observability lost: {0}")]
    Observability(String),
    #[error("iteration diverged: {0}")]
    Divergence(String),
    #[error("control target missed: {0}")]
    Control(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Precondition(_)
            | Error::GridMismatch(..)
            | Error::NotReal(_)
            | Error::Resolution(_)
            | Error::Structure { .. }
            | Error::Degeneracy(_)
            | Error::Invertibility(_)
            | Error::Smallness(_) => 3,
            Error::Contraction(_)
            | Error::Accuracy(_)
            | Error::Consistency(_)
            | Error::Observability(_)
            | Error::Divergence(_)
            | Error::Control(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
