use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0} lies outside the parametric interval [0, 1]")]
    OutOfDomain(f64),

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("Jacobian is singular or orientation-reversing at {point:?} (det = {det:e})")]
    SingularJacobian { point: Vec<f64>, det: f64 },

    #[error(
        "weighted quadrature moment system for row {row} is not solvable (residual {residual:e})"
    )]
    DegenerateQuadrature { row: usize, residual: f64 },

    #[error("direction {direction}: eigenvalues of M^-1 K are complex (max |Im| = {max_imag:e}); use the Bartels-Stewart backend")]
    ComplexEigenvalues { direction: usize, max_imag: f64 },

    #[error("direction {direction}: eigenvector matrix is ill-conditioned (cond = {cond:e}); use the Bartels-Stewart backend")]
    IllConditionedEigenvectors { direction: usize, cond: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dense eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("zero pivot in incomplete factorization at row {0}")]
    ZeroPivot(usize),

    #[error("problem too large for a dense representation ({size} > {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
