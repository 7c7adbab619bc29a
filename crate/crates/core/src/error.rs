use thiserror::Error;

/// Errors produced by the model, bound and estimator layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: point lies within {distance:e} m of {what}")]
    DegenerateGeometry { what: String, distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-identifiable configuration: {0}")]
    NonIdentifiable(String),

    #[error("failure-coefficient density is singular at zero")]
    SingularDensity,

    #[error("temporal coding needs an even number of transmissions, got {0}")]
    OddTransmissions(usize),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
