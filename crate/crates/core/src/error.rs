use std::path::PathBuf;

use thiserror::Error;

use crate::coeffs::EvalError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scale: n_q = {0}, need n_q >= 2")]
    InvalidScale(u64),

    #[error("invalid tolerance policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("undeclared parameter `{0}`")]
    UndeclaredParameter(String),

    #[error("evaluation failed at t={t}, x={x}: {source}")]
    Eval {
        t: f64,
        x: f64,
        #[source]
        source: EvalError,
    },

    #[error("path {path_id} failed at step {step} (t={t}, x={x}): {source}")]
    Simulation {
        path_id: u64,
        step: u64,
        t: f64,
        x: f64,
        #[source]
        source: EvalError,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("spec file not found: {}", .0.display())]
    SpecNotFound(PathBuf),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable kind, used in CLI error JSON and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidScale(_) => "invalid-scale",
            Error::InvalidPolicy(_) => "invalid-policy",
            Error::InvalidValue(_) => "invalid-value",
            Error::Syntax { .. } => "syntax",
            Error::UnknownFunction { .. } => "unknown-function",
            Error::UndeclaredParameter(_) => "undeclared-parameter",
            Error::Eval { .. } => "evaluation",
            Error::Simulation { .. } => "simulation",
            Error::Config(_) => "config",
            Error::InsufficientData(_) => "insufficient-data",
            Error::SpecNotFound(_) => "spec-not-found",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Location hint for error reports, when the error carries one.
    pub fn at(&self) -> Option<String> {
        match self {
            Error::Syntax { offset, .. } | Error::UnknownFunction { offset, .. } => {
                Some(format!("offset {offset}"))
            }
            Error::Eval { t, x, .. } => Some(format!("t={t},x={x}")),
            Error::Simulation { path_id, step, .. } => Some(format!("path {path_id}, step {step}")),
            Error::SpecNotFound(p) => Some(p.display().to_string()),
            _ => None,
        }
    }
}
