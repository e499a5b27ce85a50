//! Tools the agent can call, and the registry it dispatches through.

mod audit;
mod clock;
mod policy_reader;
mod report;
mod shell;

pub use audit::{standard_registry, AuditEnvironment, AuditError, Subject};
pub use clock::{clock_now, Clock};
pub use policy_reader::{read_policy_document, PolicyReadError};
pub use report::{emit_report, render_report_body, DeliveryReceipt, FileSink, ReportSink, SinkError};
pub use shell::{
    normalize_command, shell_execute, CommandPattern, ShellError, ShellExecutor, ShellMode,
    ShellPolicy,
};

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub const WINDOWS_TASK: &str = "WindowsTask";
pub const POLICY_READER: &str = "PolicyReader";
pub const CURRENT_DATE: &str = "CurrentDate";
pub const SEND_REPORT: &str = "SendReport";

/// What a tool hands back to the agent as its observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolResult {
    pub output: String,
    pub is_error: bool,
}

impl ToolResult {
    pub fn ok(output: impl Into<String>) -> Self {
        Self::build(output.into(), false)
    }

    pub fn error(output: impl Into<String>) -> Self {
        Self::build(output.into(), true)
    }

    fn build(output: String, is_error: bool) -> Self {
        let output = if output.trim().is_empty() {
            "(no output)".to_string()
        } else {
            output
        };
        Self { output, is_error }
    }
}

/// A failure of the tool itself rather than a result worth showing the
/// model (timeouts, spawn failures). The agent retries these once.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{tool} failed: {message}")]
pub struct ToolError {
    pub tool: String,
    pub message: String,
}

impl ToolError {
    pub fn new(tool: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            tool: tool.into(),
            message: message.into(),
        }
    }
}

pub type ToolHandler = Arc<dyn Fn(&str) -> Result<ToolResult, ToolError> + Send + Sync>;

#[derive(Clone)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub handler: ToolHandler,
}

impl ToolSpec {
    pub fn new<F>(name: impl Into<String>, description: impl Into<String>, handler: F) -> Self
    where
        F: Fn(&str) -> Result<ToolResult, ToolError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            description: description.into(),
            handler: Arc::new(handler),
        }
    }
}

impl fmt::Debug for ToolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolSpec")
            .field("name", &self.name)
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("a tool named {0:?} is already registered")]
    DuplicateToolName(String),
    #[error("invalid tool name {0:?}: must be non-empty with no whitespace")]
    InvalidName(String),
    #[error("tool {0:?} has an empty description")]
    EmptyDescription(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown tool {name:?}; valid tools are: {}", valid.join(", "))]
pub struct UnknownTool {
    pub name: String,
    pub valid: Vec<String>,
}

/// Tools in registration order. Names compare case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: Vec<ToolSpec>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<&mut Self, RegistryError> {
        if spec.name.is_empty() || spec.name.chars().any(char::is_whitespace) {
            return Err(RegistryError::InvalidName(spec.name));
        }
        if spec.description.trim().is_empty() {
            return Err(RegistryError::EmptyDescription(spec.name));
        }
        if self.find(&spec.name).is_some() {
            return Err(RegistryError::DuplicateToolName(spec.name));
        }
        self.tools.push(spec);
        Ok(self)
    }

    fn find(&self, name: &str) -> Option<&ToolSpec> {
        let name = name.trim();
        self.tools.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn lookup(&self, name: &str) -> Result<&ToolSpec, UnknownTool> {
        self.find(name).ok_or_else(|| UnknownTool {
            name: name.trim().to_string(),
            valid: self.names(),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.tools.iter().map(|t| t.name.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }
}
