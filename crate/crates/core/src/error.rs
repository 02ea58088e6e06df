use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    // schema and ingestion
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("target column `{0}` not found")]
    TargetMissing(String),
    #[error("unknown category `{value}` in column `{column}`")]
    UnknownCategory { column: String, value: String },
    #[error("non-finite or unparsable value `{value}` in column `{column}` (row {row})")]
    NonFiniteValue { column: String, row: usize, value: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{n_folds} folds requested but the dataset only has {rows} rows")]
    FoldCountExceedsRows { n_folds: usize, rows: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // clustering / transforms
    #[error("k = {k} exceeds the number of samples ({m})")]
    KExceedsSamples { k: usize, m: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no scaler statistics for cluster {cluster}, continuous column {column}")]
    UnknownClusterColumn { cluster: usize, column: usize },
    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("vector width {actual} does not match layout width {expected}")]
    WidthMismatch { expected: usize, actual: usize },

    // differentiable engine
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFiniteIntermediate { op: &'static str },
    #[error("gradient root must be a 1x1 scalar, got {rows}x{cols}")]
    NotScalarRoot { rows: usize, cols: usize },
    #[error("operation {op} has no differentiable gradient rule")]
    UnsupportedOpForSecondOrder { op: &'static str },
    #[error("batch of {batch} rows cannot be split into packs of {pac}")]
    BatchNotPackable { batch: usize, pac: usize },

    // training / sampling
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (critic {critic_loss}, generator {generator_loss})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        critic_loss: f64,
        generator_loss: f64,
    },
    #[error("sampling stalled: {accepted} of {requested} rows accepted after {attempts} attempts")]
    AcceptanceStalled {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },
    #[error("invalid sampling condition: {0}")]
    InvalidCondition(String),

    // evaluation
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("class {0} does not occur in the ground truth")]
    EmptyClassInTruth(usize),
    #[error("classifier used before fit")]
    NotFitted,
    #[error("real metric is zero; percent difference undefined")]
    DivisionByZeroMetric,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("missing score for method {method}, dataset {dataset}")]
    MissingCell { method: usize, dataset: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error is a runtime failure of training or sampling, as
    /// opposed to a validation problem with the inputs.
    pub fn is_runtime_failure(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::AcceptanceStalled { .. } | Error::NonFiniteIntermediate { .. }
        )
    }
}
