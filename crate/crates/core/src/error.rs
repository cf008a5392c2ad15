use alloc::string::String;

/// Failure modes shared by every module of the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid construction: {0}")]
    Construction(String),
    #[error("map folds: det A = {det:e} at lattice node {node}")]
    Folding { node: usize, det: f64 },
    #[error("point lies outside the domain")]
    OutOfDomain,
    #[error("inverse map did not converge after {iterations} iterations (residual {residual:e})")]
    Inverse { iterations: usize, residual: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("vacuum: {0}")]
    Vacuum(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape<T>(msg: &str) -> Result<T> {
    Err(Error::Shape(String::from(msg)))
}
