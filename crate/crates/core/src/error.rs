use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document at byte {offset} (line {line}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        message: String,
    },

    #[error("table {table}: row {row} has {found} cells, expected {expected}")]
    Ragged {
        table: String,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("table {table}: {message}")]
    InvalidTable { table: String, message: String },

    #[error("label code {0} is outside 0..=21")]
    InvalidLabel(i64),

    #[error("index ({row}, {col}) is outside a {rows}x{cols} table")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("unknown property `{0}`")]
    UnknownProperty(String),

    #[error("invalid entity id `{0}`")]
    InvalidEntityId(String),

    #[error("augmentation error in table {table}: {message}")]
    Augmentation { table: String, message: String },

    #[error("relabeling error in table {table}: {message}")]
    Relabel { table: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("query error: {0}")]
    Query(String),

    #[error("knowledge-base file: {0}")]
    KbFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
