use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("degenerate cloud: all points coincide")]
    DegenerateCloud,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("isomorphism search exceeded its budget of {budget} search nodes")]
    TooLarge { budget: u64 },

    #[error("partition did not stabilize within {cap} rounds")]
    NoStabilization { cap: usize },

    #[error("total mass is zero")]
    ZeroMass,

    #[error("negative radicand {value:e} below clamp threshold")]
    NegativeRadicand { value: f64 },

    #[error("anchors coincide (gap {gap:e})")]
    CoincidentAnchors { gap: f64 },

    #[error("inconsistent distances: max deviation {max_deviation:e}")]
    InconsistentDistances { max_deviation: f64 },

    #[error("cloud is not planar but no usable orientation sign exists")]
    MissingOrientation,

    #[error("cloud is not centered at the origin (centroid norm {norm:e})")]
    NotCentered { norm: f64 },

    #[error("augmented pair failed verification: {0}")]
    VerificationFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
