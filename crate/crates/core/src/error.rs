use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shrunk set is empty at coordinate {coordinate}: lower {lower} > upper {upper}")]
    InfeasibleShrink {
        coordinate: usize,
        lower: f64,
        upper: f64,
    },

    #[error("gradient is singular at coordinate {coordinate} (zero quantity)")]
    SingularGradient { coordinate: usize },

    #[error("solver failed to converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("{what} norm {norm} exceeds the declared bound {bound}")]
    BoundViolation {
        what: &'static str,
        norm: f64,
        bound: f64,
    },

    #[error("target bundle is not inducible: coordinate {coordinate} is {value} (must be > 0)")]
    NotInducible { coordinate: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
