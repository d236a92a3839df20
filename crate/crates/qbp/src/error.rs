use thiserror::Error;

use crate::operator::SiteId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site {0} is not part of the layout")]
    UnknownSite(SiteId),

    #[error("site {0} appears more than once")]
    DuplicateSite(SiteId),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("total dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("operator is not Hermitian (anti-Hermitian residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not a density matrix: {0}")]
    NotDensity(String),

    #[error("matrix logarithm undefined: eigenvalue {eigenvalue:e} is below the floor {floor:e}")]
    Singular { eigenvalue: f64, floor: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0} is not a leaf")]
    NotALeaf(SiteId),

    #[error("message support mismatch: {0}")]
    MessageSupport(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
