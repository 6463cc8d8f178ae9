use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an argument that violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Exhaustive enumeration would exceed the configured leaf budget.
    #[error("enumeration requires {required} leaves, budget is {budget}")]
    Budget { required: u128, budget: u64 },

    #[error("oracle transport error: {0}")]
    Transport(String),

    #[error("oracle timed out: {0}")]
    Timeout(String),

    #[error("oracle returned HTTP status {0}")]
    OracleStatus(u16),

    /// The oracle answered, but not with the expected schema.
    #[error("oracle protocol error: {0}")]
    Protocol(String),

    #[error("{message} at line {line} (field {field})")]
    Parse { line: usize, field: String, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
