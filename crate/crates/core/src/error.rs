use thiserror::Error;

/// Errors raised by the simulation, moment and ODE layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context} contains a non-finite value")]
    NonFinite { context: &'static str },

    #[error(
        "overlap matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("{kind} outside its domain: {detail}")]
    MomentDomain { kind: &'static str, detail: String },

    #[error("state left the ansatz manifold (block deviation {deviation:e})")]
    BlockInconsistency { deviation: f64 },

    #[error("formula diverges: {0}")]
    Divergence(String),

    #[error(
        "linearised system is singular (residual {residual:e}, condition number {condition:e})"
    )]
    SingularJacobian { residual: f64, condition: f64 },

    #[error("fixed point is unstable (leading eigenvalue real part {leading:e})")]
    UnstableFixedPoint { leading: f64 },

    #[error("malformed IDX file: {0}")]
    IdxFormat(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
