use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{truncate_at_stop, BackendError, CompletionBackend, CompletionRequest};

/// One canned model reply, optionally guarded by a substring that must occur
/// in the latest user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedExchange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_substring: Option<String>,
    pub reply: String,
}

impl ScriptedExchange {
    pub fn new(reply: impl Into<String>) -> Self {
        Self {
            expect_substring: None,
            reply: reply.into(),
        }
    }

    pub fn expecting(expect: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            expect_substring: Some(expect.into()),
            reply: reply.into(),
        }
    }
}

/// An immutable, shareable script. Cursors live in [`ScriptedSession`].
pub type Script = Arc<[ScriptedExchange]>;

/// Reads a JSON list of `{expect_substring?, reply}` records.
pub fn load_script(path: &Path) -> Result<Script, BackendError> {
    let raw = std::fs::read_to_string(path).map_err(|e| {
        BackendError::InvalidConfig(format!("cannot read script {}: {e}", path.display()))
    })?;
    let entries: Vec<ScriptedExchange> = serde_json::from_str(&raw).map_err(|e| {
        BackendError::InvalidConfig(format!("bad script {}: {e}", path.display()))
    })?;
    if let Some(i) = entries.iter().position(|e| e.reply.trim().is_empty()) {
        return Err(BackendError::InvalidConfig(format!(
            "script {} entry {i} has an empty reply",
            path.display()
        )));
    }
    Ok(entries.into())
}

/// Returns the reply at `cursor` and the advanced cursor.
pub fn scripted_complete(
    request: &CompletionRequest,
    script: &[ScriptedExchange],
    cursor: usize,
) -> Result<(String, usize), BackendError> {
    let entry = script
        .get(cursor)
        .ok_or(BackendError::ScriptExhausted { len: script.len() })?;
    if let Some(expected) = &entry.expect_substring {
        if !request.latest_user_content().contains(expected.as_str()) {
            return Err(BackendError::ExpectationMismatch {
                index: cursor,
                expected: expected.clone(),
            });
        }
    }
    Ok((
        truncate_at_stop(&entry.reply, &request.stop_sequences),
        cursor + 1,
    ))
}

/// A replay session over a shared script.
#[derive(Debug, Clone)]
pub struct ScriptedSession {
    script: Script,
    cursor: usize,
}

impl ScriptedSession {
    pub fn new(script: Script) -> Self {
        Self { script, cursor: 0 }
    }

    pub fn from_replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(replies.into_iter().map(ScriptedExchange::new).collect())
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.script.len().saturating_sub(self.cursor)
    }
}

impl CompletionBackend for ScriptedSession {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let (reply, next) = scripted_complete(request, &self.script, self.cursor)?;
        self.cursor = next;
        Ok(reply)
    }
}
