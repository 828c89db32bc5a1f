use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are grouped by the subsystem that raises
/// them; the CLI maps them onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // ---- intervals & predictions ----
    #[error("invalid interval [{start}, {end}]: {reason}")]
    InvalidInterval {
        start: f64,
        end: f64,
        reason: &'static str,
    },
    #[error("offset component {0} outside [0, 1]")]
    OffsetOutOfRange(f64),
    #[error("offset scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid frame prediction: {0}")]
    InvalidPrediction(String),
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),

    // ---- assignment ----
    #[error("match threshold must lie strictly inside (0, 1), got {0}")]
    InvalidMatchThreshold(f64),
    #[error("prediction list is empty")]
    EmptyPredictions,
    #[error("NaN confidence at frame {0}")]
    NanConfidence(usize),
    #[error("mismatched lengths: {what} (expected {expected}, got {got})")]
    MismatchedLengths {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("frozen pruning requires a captured mask matrix")]
    MissingFrozenMask,
    #[error("frozen mask shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    FrozenMaskShape {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    // ---- autodiff / model / optimizer ----
    #[error("backward requires a scalar loss node, got a {rows}x{cols} value")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite gradient in tensor '{0}'")]
    NonFiniteGradient(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // ---- inference ----
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("soft-NMS sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    // ---- evaluation ----
    #[error("negative ground-truth count")]
    NegativeGroundTruthCount,
    #[error("detections reference video '{0}' which is absent from the ground truth")]
    VideoIdMismatch(String),

    // ---- data generation & IO ----
    #[error("cannot pack requested instances disjointly in video {video_index}")]
    InfeasiblePacking { video_index: usize },
    #[error("dataset format error: {0}")]
    DatasetFormat(String),
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
    #[error("checkpoint does not match the current config: {}", .0.join("; "))]
    CheckpointMismatch(Vec<String>),
    #[error("proposal dump format error: {0}")]
    ProposalFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    // ---- training ----
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}
