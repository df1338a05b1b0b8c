use thiserror::Error;

pub type Result<T, E = GffError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GffError {
    /// Invalid experiment configuration; `field` is a JSON path such as `alpha`.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A requested size exceeds what a sampler or solver can hold in memory.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("power-law fit failed: {0}")]
    Fit(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl GffError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        GffError::Config { field: field.into(), message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        GffError::Domain(message.into())
    }

    /// Process exit code used by the CLI: 2 config, 3 capacity, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            GffError::Config { .. } | GffError::Serde(_) => 2,
            GffError::Capacity(_) => 3,
            GffError::Numeric(_) | GffError::Fit(_) => 4,
            GffError::Domain(_) => 2,
            GffError::Io(_) | GffError::Csv(_) => 1,
        }
    }
}
