use std::path::Path;

use thiserror::Error;

use crate::compliance::{parse_policy_text, PolicySet};

#[derive(Debug, Error)]
pub enum PolicyReadError {
    #[error("policy document {0} not found")]
    FileNotFound(String),
    #[error("cannot read policy document {path}: {message}")]
    Io { path: String, message: String },
    #[error("no rules extracted from policy document {0}")]
    NoRulesExtracted(String),
}

/// Loads a policy document (already extracted to UTF-8 text).
pub fn read_policy_document(path: &Path) -> Result<PolicySet, PolicyReadError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => PolicyReadError::FileNotFound(display.clone()),
        _ => PolicyReadError::Io {
            path: display.clone(),
            message: e.to_string(),
        },
    })?;
    parse_policy_text(&text, &display).map_err(|_| PolicyReadError::NoRulesExtracted(display))
}
