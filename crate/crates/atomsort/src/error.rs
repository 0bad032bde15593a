use crate::lattice::SiteCoord;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("site {site:?} out of bounds for {width}x{height} grid")]
    OutOfBounds {
        site: SiteCoord,
        width: usize,
        height: usize,
    },

    #[error("region {0} does not fit inside the grid")]
    RegionOutOfBounds(String),

    #[error("mask dimension mismatch: {0}")]
    MaskMismatch(String),

    #[error("invalid probability {name} = {value}; must lie in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
