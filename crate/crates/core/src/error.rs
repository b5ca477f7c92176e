use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("malformed row at line {line}: column `{column}` has value {value:?}")]
    MalformedRow {
        line: u64,
        column: String,
        value: String,
    },

    #[error("trip `{0}` carries more than one distinct influence report")]
    ConflictingInfluence(String),

    #[error("trip `{trip_id}` has invalid driver type {value:?}")]
    InvalidDriverType { trip_id: String, value: String },

    #[error("trip `{0}` mixes public and private driver types")]
    ConflictingDriverType(String),

    #[error("corpus contains no trips")]
    EmptyCorpus,

    #[error("training data is empty")]
    EmptyData,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("matrix is degenerate: {0}")]
    DegenerateMatrix(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("minority class has {0} sample(s); SMOTE needs at least 2")]
    TooFewMinority(usize),

    #[error("feature width mismatch: model expects {expected}, data has {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
