use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("closure condition violated (residual {residual:.3e})")]
    NotClosed { residual: f64 },
    #[error("method refused: {0}")]
    MethodRefused(String),
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("X is not diagonalizable (eigenvector condition {0:.3e})")]
    NonDiagonalizable(f64),
    #[error("covariance is singular: {0}")]
    SingularCovariance(String),
    #[error("sector generator of order {0} is singular")]
    SingularSector(usize),
    #[error("tensor is not antisymmetric (residual {0:.3e})")]
    ReduceLossy(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
