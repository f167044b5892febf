use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("collection must contain at least one document")]
    EmptyCollection,

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("invalid range on field {field}: low {low} > high {high}")]
    InvalidRange { field: String, low: i64, high: i64 },

    #[error("query must constrain exactly the fields A and B, got {0}")]
    InvalidQueryFields(String),

    #[error("unknown plan `{name}` (valid plans: {valid})")]
    UnknownPlan { name: String, valid: String },

    #[error("plan {0} cannot be produced for this query and index catalog")]
    PlanNotAvailable(String),

    #[error("index `{0}` does not exist in the catalog")]
    MissingIndex(String),

    #[error("duplicate index `{0}`")]
    DuplicateIndex(String),

    #[error("race requires at least one candidate plan")]
    NoCandidates,

    #[error("productivity is undefined for a plan with zero work units")]
    ZeroWorks,

    #[error("no palette colour for plan {0}")]
    MissingColor(String),

    #[error("all {0} samples were rejected as outliers")]
    AllSamplesFiltered(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serializing {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
