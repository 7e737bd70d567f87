use thiserror::Error;

use crate::dynamics::SemiclassicalState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("photon distribution overflow for s = {s}, m = {m}")]
    Overflow { s: f64, m: f64 },

    #[error("integration failed at t = {t:e} s: {reason}")]
    Integration {
        t: f64,
        reason: String,
        last_state: Box<SemiclassicalState>,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("oracle check failed: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
