use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("column `{0}` in the data file is not declared in the schema")]
    UnknownColumn(String),

    #[error("schema column `{0}` is missing from the data file")]
    MissingColumn(String),

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("cannot parse cell at row {row}, column `{col}`: {value:?}")]
    ParseFailure { row: usize, col: String, value: String },

    #[error("value {value:?} of ordinal column `{column}` is not in its declared order")]
    UnknownOrdinal { column: String, value: String },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("class {class} has {count} members; stratified 5-fold splitting needs at least 5")]
    StratificationImpossible { class: usize, count: usize },

    #[error("need at least 10 instances for 5-fold splitting, got {0}")]
    TooFewInstances(usize),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("rule mining needs at least one positive instance")]
    NoPositives,

    #[error("no activation threshold produced a rule for any dictionary feature")]
    NoSemanticsFound,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("artifact format mismatch: expected `{expected}`, found `{found}`")]
    Format { expected: String, found: String },

    #[error("artifact provenance mismatch: expected id {expected}, found {found}")]
    Provenance { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incomplete run directory: {0}")]
    IncompleteRun(String),

    #[error("{failed} of {total} folds failed; see the manifest for details")]
    FoldsFailed { failed: usize, total: usize },
}

impl Error {
    /// Process exit status: 1 configuration or input, 2 training, 3
    /// artifact incompatibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TrainingDiverged { .. }
            | Error::NoSemanticsFound
            | Error::NoPositives
            | Error::FoldsFailed { .. } => 2,
            Error::Format { .. } | Error::Provenance { .. } | Error::IncompleteRun(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            context,
            expected,
            got,
        }
    }
}
