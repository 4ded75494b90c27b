use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of range: {value} not in [{min}, {max}]")]
    Range {
        what: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("cannot estimate attributes: {0}")]
    Estimation(String),
    #[error("non-finite gradient in `{tensor}`")]
    NonFiniteGradient { tensor: String },
    #[error("non-finite loss at epoch {epoch}, anchor {anchor}")]
    NonFiniteLoss { epoch: usize, anchor: usize },
    #[error("invalid attribute schema: {0}")]
    Schema(String),
    #[error("attribute `{attribute}`: value {value} is not a valid level")]
    Quantize { attribute: String, value: f64 },
    #[error("need at least {needed} anchors, got {got}")]
    TooFewAnchors { needed: usize, got: usize },
    #[error("need at least {needed} principal components, got {got}")]
    TooFewComponents { needed: usize, got: usize },
    #[error("attribute `{0}` has a degenerate range (lo == hi)")]
    DegenerateRange(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid degradation: {0}")]
    Degradation(String),
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed container: {0}")]
    Format(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
