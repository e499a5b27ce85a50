//! Audit scenarios: run the agent on a canned environment, grade its answer
//! against the rule engine and tabulate the results.
//!
//! A bundle lives in `scenarios/<id>/` as `spec.json` plus `script.json`
//! (the scripted model replies). Fixtures are shared and referenced by file
//! name.

mod fixtures;
mod matrix;

pub use fixtures::{account_fixture_path, load_command_map, FixtureSet, NET_USER_LISTING};
pub use matrix::{run_all, Matrix, MatrixRow};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, AgentLimits, PromptTemplate, Transcript};
use crate::compliance::{Compliance, Scope};
use crate::llm::{load_script, BackendError, CompletionBackend, ScriptedSession};
use crate::tools::{
    normalize_command, standard_registry, AuditEnvironment, AuditError, Clock, FileSink, ShellExecutor,
    ShellPolicy, Subject, POLICY_READER, WINDOWS_TASK,
};
use crate::parsers::DateFormatConfig;

/// Expected compliance status per canonical scenario.
pub const REFERENCE_MATRIX: [(&str, Compliance); 6] = [
    ("1a", Compliance::NonCompliant),
    ("1b", Compliance::Compliant),
    ("2a", Compliance::NonCompliant),
    ("2b", Compliance::Compliant),
    ("3a", Compliance::NonCompliant),
    ("3b", Compliance::Compliant),
];

pub fn reference_status(id: &str) -> Option<Compliance> {
    REFERENCE_MATRIX.iter().find(|(i, _)| *i == id).map(|(_, c)| *c)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("fixture missing: {}", .0.display())]
    FixtureMissing(PathBuf),
    #[error("script missing: {}", .0.display())]
    ScriptMissing(PathBuf),
    #[error("invalid scenario spec {}: {reason}", path.display())]
    InvalidSpec { path: PathBuf, reason: String },
    #[error("unknown scenario id {0:?}")]
    UnknownScenario(String),
    #[error("scenario run panicked")]
    Panicked,
    #[error("live mode needs a configured model backend")]
    NoLiveBackend,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("oracle audit failed: {0}")]
    Oracle(#[from] AuditError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    Scripted,
    Live,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Account name, or `machine`.
    pub subject: String,
    pub fixtures: FixtureSet,
    /// Relative paths resolve against the bundle directory.
    #[serde(rename = "script")]
    pub script_path: PathBuf,
    pub expected_compliance: Compliance,
}

impl ScenarioSpec {
    pub fn subject(&self) -> Subject {
        Subject::parse(&self.subject).unwrap_or(Subject::Machine)
    }

    pub fn scope(&self) -> Scope {
        match self.subject() {
            Subject::Machine => Scope::Machine,
            Subject::Account(_) => Scope::Account,
        }
    }
}

/// Reads `<dir>/spec.json`; the script path is made absolute.
pub fn load_spec(dir: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let path = dir.join("spec.json");
    let text = std::fs::read_to_string(&path).map_err(|_| ScenarioError::FixtureMissing(path.clone()))?;
    let mut spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| ScenarioError::InvalidSpec {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if spec.id.trim().is_empty() || spec.prompt.trim().is_empty() {
        return Err(ScenarioError::InvalidSpec {
            path,
            reason: "id and prompt must be non-empty".into(),
        });
    }
    if let Some(expected) = reference_status(&spec.id) {
        if expected != spec.expected_compliance {
            return Err(ScenarioError::InvalidSpec {
                path,
                reason: format!("expected_compliance disagrees with the reference table ({expected:?})"),
            });
        }
    }
    if spec.script_path.is_relative() {
        spec.script_path = dir.join(&spec.script_path);
    }
    Ok(spec)
}

/// Loads every bundle under `scenarios_dir`, sorted by id.
pub fn load_all(scenarios_dir: &Path) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    let entries = std::fs::read_dir(scenarios_dir)
        .map_err(|_| ScenarioError::FixtureMissing(scenarios_dir.to_path_buf()))?;
    let mut specs = Vec::new();
    for entry in entries.flatten() {
        if entry.path().join("spec.json").is_file() {
            specs.push(load_spec(&entry.path())?);
        }
    }
    specs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(specs)
}

/// Keeps the specs named in `ids` (all when empty), in id order.
pub fn select(specs: Vec<ScenarioSpec>, ids: &[String]) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    if let Some(missing) = ids.iter().find(|id| !specs.iter().any(|s| &s.id == *id)) {
        return Err(ScenarioError::UnknownScenario(missing.clone()));
    }
    Ok(specs
        .into_iter()
        .filter(|s| ids.is_empty() || ids.contains(&s.id))
        .collect())
}

pub type BackendFactory =
    Arc<dyn Fn() -> Result<Box<dyn CompletionBackend + Send>, BackendError> + Send + Sync>;

#[derive(Clone)]
pub struct HarnessConfig {
    pub fixtures_dir: PathBuf,
    /// Reports from `SendReport` land in `<report_dir>/<scenario id>/`.
    pub report_dir: PathBuf,
    pub limits: AgentLimits,
    pub date_format: DateFormatConfig,
    pub live_backend: Option<BackendFactory>,
}

impl HarnessConfig {
    pub fn new(fixtures_dir: impl Into<PathBuf>, report_dir: impl Into<PathBuf>) -> Self {
        Self {
            fixtures_dir: fixtures_dir.into(),
            report_dir: report_dir.into(),
            limits: AgentLimits::default(),
            date_format: DateFormatConfig::default(),
            live_backend: None,
        }
    }

    /// The tool environment a scenario runs against.
    pub fn environment(&self, spec: &ScenarioSpec) -> Result<AuditEnvironment, ScenarioError> {
        let fixtures = &spec.fixtures;
        let map = load_command_map(&self.fixtures_dir, &fixtures.net_accounts)?;
        let policy_path = self.fixtures_dir.join(&fixtures.policy);
        if !policy_path.is_file() {
            return Err(ScenarioError::FixtureMissing(policy_path));
        }
        if let Subject::Account(name) = spec.subject() {
            let path = account_fixture_path(&self.fixtures_dir, &name);
            if !path.is_file() {
                return Err(ScenarioError::FixtureMissing(path));
            }
        }
        Ok(AuditEnvironment {
            shell: Arc::new(ShellExecutor::new(ShellPolicy::fixture(map))),
            policy_path,
            clock: Clock::fixed(fixtures.clock_date),
            date_format: self.date_format,
            sink: Arc::new(FileSink::new(self.report_dir.join(&spec.id))),
            task_query: spec.prompt.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportedCompliance {
    Compliant,
    NonCompliant,
    Indeterminate,
}

impl ReportedCompliance {
    pub fn label(self) -> &'static str {
        match self {
            ReportedCompliance::Compliant => "Compliant",
            ReportedCompliance::NonCompliant => "Non-Compliant",
            ReportedCompliance::Indeterminate => "Indeterminate",
        }
    }

    pub fn matches(self, c: Compliance) -> bool {
        matches!(
            (self, c),
            (ReportedCompliance::Compliant, Compliance::Compliant)
                | (ReportedCompliance::NonCompliant, Compliance::NonCompliant)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskResult {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario_id: String,
    pub interpreted_task: bool,
    pub executed_independently: bool,
    pub reported_compliance: ReportedCompliance,
    pub oracle_compliance: Compliance,
    pub task_result: TaskResult,
    /// The answer hedges on a date the clock tool could have supplied.
    pub hedged: bool,
    pub transcript: Transcript,
}

const NEGATIVE_MARKERS: [&str; 5] = ["not compl", "non-compliant", "does not comply", "fail", "violat"];
const POSITIVE_MARKERS: [&str; 5] = ["compliant", "complies", "comply", "within the past", "pass"];
const HEDGE_MARKERS: [&str; 1] = ["if today's date"];

fn normalized(answer: &str) -> String {
    answer.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'")
}

/// Keyword grading of a final answer; any negative marker wins.
pub fn classify_final_answer(answer: &str) -> ReportedCompliance {
    let text = normalized(answer);
    if NEGATIVE_MARKERS.iter().any(|m| text.contains(m)) {
        ReportedCompliance::NonCompliant
    } else if POSITIVE_MARKERS.iter().any(|m| text.contains(m)) {
        ReportedCompliance::Compliant
    } else {
        ReportedCompliance::Indeterminate
    }
}

pub fn is_hedged(answer: &str) -> bool {
    let text = normalized(answer);
    HEDGE_MARKERS.iter().any(|m| text.contains(m))
}

/// Whether the first tool call goes after evidence for the right scope.
pub fn interpreted_task(transcript: &Transcript, scope: Scope) -> bool {
    let Some(first) = transcript.steps.first() else {
        return false;
    };
    if first.action_name.eq_ignore_ascii_case(POLICY_READER) {
        return true;
    }
    if !first.action_name.eq_ignore_ascii_case(WINDOWS_TASK) {
        return false;
    }
    let command = normalize_command(first.action_input.trim_matches('"')).to_ascii_lowercase();
    match scope {
        Scope::Account => command.starts_with("net user"),
        Scope::Machine => command.starts_with("net accounts"),
    }
}

/// The rule engine's verdict on the scenario's fixtures. Never touches a
/// model backend.
pub fn oracle_compliance(spec: &ScenarioSpec, config: &HarnessConfig) -> Result<Compliance, ScenarioError> {
    let env = config.environment(spec)?;
    Ok(env.audit(&spec.subject())?.overall)
}

fn backend_for(
    spec: &ScenarioSpec,
    mode: RunMode,
    config: &HarnessConfig,
) -> Result<Box<dyn CompletionBackend + Send>, ScenarioError> {
    match mode {
        RunMode::Scripted => {
            if !spec.script_path.is_file() {
                return Err(ScenarioError::ScriptMissing(spec.script_path.clone()));
            }
            Ok(Box::new(ScriptedSession::new(load_script(&spec.script_path)?)))
        }
        RunMode::Live => {
            let factory = config.live_backend.as_ref().ok_or(ScenarioError::NoLiveBackend)?;
            Ok(factory()?)
        }
    }
}

pub fn run_scenario(spec: &ScenarioSpec, mode: RunMode, config: &HarnessConfig) -> Result<ScenarioResult, ScenarioError> {
    let env = Arc::new(config.environment(spec)?);
    let mut backend = backend_for(spec, mode, config)?;
    let oracle = env.audit(&spec.subject())?.overall;

    let tools = standard_registry(env);
    let template = PromptTemplate::for_tools(&tools);
    let transcript = agent::run(&spec.prompt, &tools, backend.as_mut(), &template, &config.limits);

    let answer = transcript.final_answer.as_deref().unwrap_or("");
    let reported = if transcript.is_completed() {
        classify_final_answer(answer)
    } else {
        ReportedCompliance::Indeterminate
    };
    let executed = transcript.is_completed();
    let task_result = if executed && reported.matches(oracle) {
        TaskResult::Pass
    } else {
        TaskResult::Fail
    };
    Ok(ScenarioResult {
        scenario_id: spec.id.clone(),
        interpreted_task: interpreted_task(&transcript, spec.scope()),
        executed_independently: executed,
        reported_compliance: reported,
        oracle_compliance: oracle,
        task_result,
        hedged: is_hedged(answer),
        transcript,
    })
}
