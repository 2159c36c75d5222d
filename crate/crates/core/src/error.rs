use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series `{name}` too short: need at least {needed} values, got {got}")]
    TooShort {
        name: String,
        needed: usize,
        got: usize,
    },
    #[error("series `{name}` has a nonpositive level {value} at year {year}")]
    NonPositiveLevel { name: String, year: i32, value: f64 },
    #[error("series `{name}` has a non-finite value at year {year}")]
    NonFinite { name: String, year: i32 },
    #[error("no overlapping years among {0}")]
    NoOverlap(String),
    #[error("series spans differ: {0}")]
    SpanMismatch(String),
    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient observations: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported specification: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("data file error at row {row}, column `{column}`: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Input problems exit with 1, numerical problems with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient(_)
            | Error::Degenerate(_)
            | Error::Numerical(_)
            | Error::InsufficientData(_) => 2,
            _ => 1,
        }
    }
}
