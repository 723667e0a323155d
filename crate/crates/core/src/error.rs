use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscordError {
    #[error("series contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("flat window: {0}")]
    FlatWindow(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("epsilon calibration failed: {0}")]
    Calibration(String),

    #[error("no feasible target: every candidate is flat or has an empty context set")]
    NoFeasibleTarget,

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = DiscordError> = std::result::Result<T, E>;
