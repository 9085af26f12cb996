use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Syntax or name-resolution failure while reading an expression.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at position {position}")]
pub struct ParseError {
    /// Byte offset into the source text.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("expression error: {0}")]
    Parse(#[from] ParseError),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("origin is not an equilibrium: |f(0)| = {residual:e}")]
    OriginNotEquilibrium { residual: f64 },

    #[error("linearization has non-real eigenvalue {re} {im:+}i; complex spectra are not supported")]
    ComplexEigenvalue { re: f64, im: f64 },

    #[error("linearization has repeated eigenvalue {0}; eigenvalues must be simple")]
    RepeatedEigenvalue(f64),

    #[error("spectrum is not Hurwitz: eigenvalue {0} is not strictly negative")]
    NotHurwitz(f64),

    #[error("trajectory blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("path integral diverges: -lambda + 2*lambda_max = {exponent} is not negative")]
    PathIntegralDivergent { exponent: f64 },

    #[error("invalid collocation problem: {0}")]
    InvalidProblem(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("invalid triangulation: {0}")]
    Triangulation(String),

    #[error("B override fails validation: entry ({row}, {col}) = {given} but probed second partial reaches {required}")]
    BBoundTooSmall {
        row: usize,
        col: usize,
        given: f64,
        required: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigen decomposition failed: {0}")]
    Eigen(String),
}
