use std::fmt;

use serde::Serialize;

/// Error reported to the user as one JSON line on stderr.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn config(field: Option<String>, message: impl Into<String>) -> Self {
        Self {
            kind: "invalid_config",
            field,
            message: message.into(),
        }
    }

    pub fn data(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: "data",
            field: Some(path.into()),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: "usage",
            field: None,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: "runtime",
            field: None,
            message: message.into(),
        }
    }

    /// Wraps a library error; invalid parameters are pinned to the config
    /// key that sets them.
    pub fn from_core(err: bcall::Error, config: &serde_json::Value) -> Self {
        match &err {
            bcall::Error::InvalidParam { field, .. } => {
                Self::config(Some(crate::config::locate_field(config, field)), err.to_string())
            }
            bcall::Error::RateTooHigh { .. } | bcall::Error::NegativeWeight(_) => Self::config(None, err.to_string()),
            bcall::Error::Idx { path, .. } | bcall::Error::Csv { path, .. } => {
                Self::data(path.display().to_string(), err.to_string())
            }
            _ => Self::runtime(err.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "runtime" => 1,
            "data" => 3,
            _ => 2,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&serde_json::json!({ "error": self })).expect("plain data")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{}: {}", field, self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::runtime(e.to_string())
    }
}
