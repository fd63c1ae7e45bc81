use thiserror::Error;

/// Every failure the engine can report.
///
/// Variants map one-to-one onto the C status codes exposed by the FFI crate,
/// so new variants must be appended there as well.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Index(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("unknown column `{0}`")]
    Name(String),

    #[error("invalid mapping: {0}")]
    Mapping(String),

    #[error("type mismatch: {0}")]
    Type(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("duplicate primary key {key} in `{table}.{column}`")]
    DuplicateKey {
        table: String,
        column: String,
        key: i64,
    },

    #[error("malformed tree: {0}")]
    Tree(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("generator error: {0}")]
    Gen(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Shape(format!($($arg)*))
    };
}
pub(crate) use shape_err;
