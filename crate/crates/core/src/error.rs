use thiserror::Error;

/// Errors produced by the chaoslab library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("order {k} is out of range (maximum {max})")]
    OrderOutOfRange { k: usize, max: usize },
    #[error("expected a unit vector, got norm {norm}")]
    NotUnitVector { norm: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("contraction index r = {r} out of range for orders ({k}, {l})")]
    ContractionOutOfRange { r: usize, k: usize, l: usize },
    #[error("unsupported chaos order {k}: {reason}")]
    UnsupportedOrder { k: usize, reason: &'static str },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid chaos coefficients: {0}")]
    Coefficient(String),
    #[error("loss `{0}` cannot be used for training")]
    UnfittableLoss(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("labels must be in {{-1, +1}}: {0}")]
    NonBinaryLabels(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed batch file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
