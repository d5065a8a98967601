//! JSON loading and saving with errors that name the file and the field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// Failures before or after the numerical work; all map to exit status 2.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: invalid value at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("{0}")]
    Usage(String),
}

/// Parses a file into a JSON tree, reporting syntax errors by position.
pub fn load_value(path: &Path) -> Result<Value, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Converts a JSON tree to a typed value; schema and invariant violations
/// carry the path of the offending field (`.` for the whole document).
pub fn from_value<T: DeserializeOwned>(value: &Value, path: &Path) -> Result<T, IoError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        IoError::Schema {
            path: path.to_owned(),
            field,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    from_value(&load_value(path)?, path)
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

pub fn save_text(text: &str, path: &Path) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.to_owned(),
        source,
    })
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    save_text(&to_pretty(value), path)
}
