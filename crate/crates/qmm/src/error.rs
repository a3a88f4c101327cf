use thiserror::Error;

use crate::state::SiteId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("supports collide on site {0}")]
    SupportCollision(SiteId),

    #[error("site {0} is not part of the support")]
    SiteNotInSupport(SiteId),

    #[error("set is not a valid subset of the support: {0}")]
    InvalidSubset(String),

    #[error("matrix is not Hermitian: max deviation {0:.3e}")]
    NotHermitian(f64),

    #[error("trace deviates from 1 by {0:.3e}")]
    InvalidTrace(f64),

    #[error("matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operands live on different supports")]
    SupportMismatch,

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("no marginal available for cluster {0}")]
    MissingMarginal(usize),

    #[error("string malformed at symbol {index}: {reason}")]
    MalformedString { index: usize, reason: String },

    #[error("extension domain violated: {0}")]
    ExtensionDomain(String),

    #[error("base state has no support above the cutoff")]
    RankZeroBase,

    #[error("operation not supported for this layout")]
    UnsupportedLayout,

    #[error("invalid instance specification: {0}")]
    InvalidSpec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
