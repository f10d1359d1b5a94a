use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented bound.
    #[error("invalid value for `{field}`: {value} (must be {bound})")]
    InvalidParam {
        field: &'static str,
        value: String,
        bound: &'static str,
    },

    #[error("non-finite {variable} in unit {unit} at step {step}")]
    NonFinite {
        unit: usize,
        step: u64,
        variable: &'static str,
    },

    #[error("rate {rate} Hz is not representable at dt = {dt} s (rate * dt > 1)")]
    RateTooHigh { rate: f64, dt: f64 },

    #[error("negative synaptic weight {0}")]
    NegativeWeight(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0}")]
    Undefined(&'static str),

    #[error("malformed IDX file {path}: {reason} at byte offset {offset}")]
    Idx {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("malformed CSV {path} line {line}: {reason}")]
    Csv {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, value: impl ToString, bound: &'static str) -> Self {
        Error::InvalidParam {
            field,
            value: value.to_string(),
            bound,
        }
    }
}
