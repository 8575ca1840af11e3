use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants split into configuration problems (bad inputs, malformed files)
/// and numerical failures (non-coalescence, degenerate estimates). The CLI maps
/// the two groups onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("block index {index} out of range for {lambda} blocks")]
    BlockOutOfRange { index: usize, lambda: usize },

    #[error("estimate has an exactly zero factor (block {block}, draw {draw})")]
    DegenerateEstimate { block: usize, draw: usize },

    #[error("coupling from the past did not coalesce within {cap} sweeps")]
    NoCoalescence { cap: u64 },

    #[error("monotone coupling violated at sweep {sweep}")]
    MonotonicityViolated { sweep: u64 },

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("input data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlRead(#[from] toml::de::Error),

    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
}

impl Error {
    /// True for failures caused by user-supplied inputs rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::BlockOutOfRange { .. }
                | Error::Data(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::TomlRead(_)
                | Error::TomlWrite(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
