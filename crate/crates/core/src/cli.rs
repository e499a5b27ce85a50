//! Command-line front end: `ask`, `scenario list|run` and `check`.
//!
//! Exit codes: 0 success, 1 the audited outcome was negative (run not
//! completed, a scenario failed, subject non-compliant), 2 usage or
//! configuration errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::agent::{self, AgentLimits, PromptTemplate};
use crate::compliance::Compliance;
use crate::llm::{load_script, BackendConfig, CompletionBackend, HttpBackend, ScriptedSession};
use crate::parsers::DateFormatConfig;
use crate::scenario::{self, load_command_map, HarnessConfig, RunMode};
use crate::tools::{
    standard_registry, AuditEnvironment, AuditError, Clock, FileSink, ShellError, ShellExecutor, ShellPolicy,
    Subject,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_MODEL: &str = "gpt-4";
const DEFAULT_POLICY_FILE: &str = "cis_password_policy.txt";
const DEFAULT_NET_ACCOUNTS: &str = "net_accounts_before.txt";
const LIVE_FIXTURES: &str = "live";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Scripted,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Scripted,
    Live,
}

#[derive(Debug, Parser)]
#[command(name = "audit-agent", version, about = "LLM agent for Windows password-policy audits")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// Key-value config file (`key = value` per line); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Chat-completions URL for the http backend.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Fixture directory, a JSON command→output map, `before`/`after`
    /// (machine settings state), or `live` to run real commands.
    #[arg(long, global = true)]
    pub fixtures: Option<String>,
    #[arg(long, global = true)]
    pub policy: Option<PathBuf>,
    #[arg(long, global = true)]
    pub report_dir: Option<PathBuf>,
    /// Fixed audit date (YYYY-MM-DD).
    #[arg(long, global = true)]
    pub date: Option<String>,
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub out: Option<OutputFormat>,
    /// Scripted-backend reply file.
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the agent on one prompt.
    Ask { prompt: String },
    /// List or run the audit scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Audit an account (or `machine`) directly with the rule engine.
    Check { subject: String },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    List,
    Run {
        ids: Vec<String>,
        #[arg(long, value_enum, default_value = "scripted")]
        mode: ModeArg,
        /// Directory holding the scenario bundles.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {}: {reason}", path.display())]
    File { path: PathBuf, reason: String },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("invalid {field}: {value:?}")]
    Invalid { field: &'static str, value: String },
    #[error("fixtures not found: {0}")]
    Fixtures(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureSource {
    Dir { dir: PathBuf, net_accounts: String },
    Map(PathBuf),
    Live,
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub backend: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_id: String,
    pub fixtures: FixtureSource,
    pub policy_path: PathBuf,
    pub report_dir: PathBuf,
    pub date_override: Option<NaiveDate>,
    pub max_steps: usize,
    pub output_format: OutputFormat,
    pub script_path: Option<PathBuf>,
}

/// `<cwd>/<name>` when it exists, else the copy shipped with the source tree.
fn default_dir(name: &str) -> PathBuf {
    let local = PathBuf::from(name);
    if local.exists() {
        return local;
    }
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(name);
    if shipped.exists() {
        shipped
    } else {
        local
    }
}

pub fn default_fixtures_dir() -> PathBuf {
    default_dir("fixtures")
}

pub fn default_scenarios_dir() -> PathBuf {
    default_dir("scenarios")
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::File {
            path: path.to_path_buf(),
            reason: format!("line {}: expected key = value", n + 1),
        })?;
        map.insert(k.trim().replace('-', "_").to_ascii_lowercase(), v.trim().to_string());
    }
    Ok(map)
}

fn resolve_fixtures(spec: Option<&str>) -> Result<FixtureSource, ConfigError> {
    let Some(spec) = spec.map(str::trim).filter(|s| !s.is_empty()) else {
        return Ok(FixtureSource::Dir {
            dir: default_fixtures_dir(),
            net_accounts: DEFAULT_NET_ACCOUNTS.into(),
        });
    };
    if spec.eq_ignore_ascii_case(LIVE_FIXTURES) {
        return Ok(FixtureSource::Live);
    }
    let path = PathBuf::from(spec);
    if path.is_dir() {
        let net_accounts = if path.join("net_accounts.txt").is_file() {
            "net_accounts.txt"
        } else {
            DEFAULT_NET_ACCOUNTS
        };
        return Ok(FixtureSource::Dir {
            dir: path,
            net_accounts: net_accounts.into(),
        });
    }
    if path.is_file() {
        return Ok(FixtureSource::Map(path));
    }
    if spec.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        let dir = default_fixtures_dir();
        let file = format!("net_accounts_{}.txt", spec.to_ascii_lowercase());
        if dir.join(&file).is_file() {
            return Ok(FixtureSource::Dir { dir, net_accounts: file });
        }
    }
    Err(ConfigError::Fixtures(spec.to_string()))
}

impl CliConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).cloned();

        let backend = match &args.backend {
            Some(b) => *b,
            None => match get("backend") {
                Some(v) => BackendKind::from_str(&v, true).map_err(|_| ConfigError::Invalid {
                    field: "backend",
                    value: v,
                })?,
                None => BackendKind::Scripted,
            },
        };
        let output_format = match &args.out {
            Some(o) => *o,
            None => match get("out") {
                Some(v) => OutputFormat::from_str(&v, true).map_err(|_| ConfigError::Invalid {
                    field: "out",
                    value: v,
                })?,
                None => OutputFormat::Text,
            },
        };
        let fixtures = resolve_fixtures(args.fixtures.clone().or_else(|| get("fixtures")).as_deref())?;
        let policy_path = match args.policy.clone().or_else(|| get("policy").map(PathBuf::from)) {
            Some(p) => p,
            None => match &fixtures {
                FixtureSource::Dir { dir, .. } if dir.join(DEFAULT_POLICY_FILE).is_file() => {
                    dir.join(DEFAULT_POLICY_FILE)
                }
                _ => default_fixtures_dir().join(DEFAULT_POLICY_FILE),
            },
        };
        let date_override = match args.date.clone().or_else(|| get("date")) {
            Some(d) => Some(
                NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d")
                    .map_err(|_| ConfigError::Invalid { field: "date", value: d })?,
            ),
            None => None,
        };
        let max_steps = match args.max_steps {
            Some(n) => n,
            None => match get("max_steps") {
                Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                    field: "max_steps",
                    value: v,
                })?,
                None => AgentLimits::default().max_steps,
            },
        };
        if max_steps == 0 {
            return Err(ConfigError::Invalid {
                field: "max_steps",
                value: "0".into(),
            });
        }
        Ok(Self {
            backend,
            endpoint_url: args.endpoint.clone().or_else(|| get("endpoint")),
            model_id: args.model.clone().or_else(|| get("model")).unwrap_or_else(|| DEFAULT_MODEL.into()),
            fixtures,
            policy_path,
            report_dir: args
                .report_dir
                .clone()
                .or_else(|| get("report_dir").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("audit-reports")),
            date_override,
            max_steps,
            output_format,
            script_path: args.script.clone().or_else(|| get("script").map(PathBuf::from)),
        })
    }

    pub fn limits(&self) -> AgentLimits {
        let defaults = AgentLimits::default();
        AgentLimits {
            max_steps: self.max_steps,
            loop_window: defaults.loop_window.min(self.max_steps),
            ..defaults
        }
    }

    pub fn clock(&self) -> Clock {
        self.date_override.map(Clock::fixed).unwrap_or_default()
    }

    pub fn shell(&self) -> Result<ShellExecutor, CliError> {
        let policy = match &self.fixtures {
            FixtureSource::Live => ShellPolicy::live(),
            FixtureSource::Dir { dir, net_accounts } => ShellPolicy::fixture(
                load_command_map(dir, net_accounts).map_err(|e| CliError::Usage(e.to_string()))?,
            ),
            FixtureSource::Map(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let map: BTreeMap<String, String> = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                ShellPolicy::fixture(map)
            }
        };
        Ok(ShellExecutor::new(policy))
    }

    pub fn environment(&self, task_query: &str) -> Result<AuditEnvironment, CliError> {
        Ok(AuditEnvironment {
            shell: Arc::new(self.shell()?),
            policy_path: self.policy_path.clone(),
            clock: self.clock(),
            date_format: DateFormatConfig::default(),
            sink: Arc::new(FileSink::new(&self.report_dir)),
            task_query: task_query.to_string(),
        })
    }

    fn http_config(&self) -> Result<BackendConfig, CliError> {
        let endpoint = self
            .endpoint_url
            .clone()
            .ok_or(CliError::Config(ConfigError::Missing("endpoint (--endpoint) for the http backend")))?;
        let config = BackendConfig::new(endpoint, &self.model_id);
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    pub fn backend(&self) -> Result<Box<dyn CompletionBackend + Send>, CliError> {
        match self.backend {
            BackendKind::Scripted => {
                let path = self
                    .script_path
                    .as_ref()
                    .ok_or(CliError::Config(ConfigError::Missing("script (--script) for the scripted backend")))?;
                let script = load_script(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                Ok(Box::new(ScriptedSession::new(script)))
            }
            BackendKind::Http => {
                let backend = HttpBackend::from_env(self.http_config()?).map_err(|e| CliError::Usage(e.to_string()))?;
                Ok(Box::new(backend))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
}

fn print_json(out: &mut dyn Write, value: &impl serde::Serialize) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable"))
}

pub fn cmd_ask(prompt: &str, config: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut backend = config.backend()?;
    let tools = standard_registry(Arc::new(config.environment(prompt)?));
    let template = PromptTemplate::for_tools(&tools);
    let transcript = agent::run(prompt, &tools, backend.as_mut(), &template, &config.limits());
    let written = match config.output_format {
        OutputFormat::Json => print_json(out, &transcript),
        OutputFormat::Text => write!(out, "{}", transcript.render_text()),
    };
    written.map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(if transcript.is_completed() { EXIT_OK } else { EXIT_NEGATIVE })
}

pub fn cmd_scenario(action: &ScenarioAction, config: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Usage(e.to_string());
    match action {
        ScenarioAction::List => {
            let specs = scenario::load_all(&default_scenarios_dir()).map_err(|e| CliError::Usage(e.to_string()))?;
            for s in specs {
                let note = s.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
                writeln!(out, "{}\t{}{note}", s.id, s.prompt).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        ScenarioAction::Run { ids, mode, scenarios } => {
            let dir = scenarios.clone().unwrap_or_else(default_scenarios_dir);
            let all = scenario::load_all(&dir).map_err(|e| CliError::Usage(e.to_string()))?;
            let specs = scenario::select(all, ids).map_err(|e| CliError::Usage(e.to_string()))?;
            let fixtures_dir = match &config.fixtures {
                FixtureSource::Dir { dir, .. } => dir.clone(),
                _ => default_fixtures_dir(),
            };
            let mut harness = HarnessConfig::new(fixtures_dir, &config.report_dir);
            harness.limits = config.limits();
            let mode = match mode {
                ModeArg::Scripted => RunMode::Scripted,
                ModeArg::Live => {
                    let http = config.http_config()?;
                    HttpBackend::from_env(http.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
                    harness.live_backend = Some(Arc::new(move || {
                        Ok(Box::new(HttpBackend::from_env(http.clone())?) as Box<dyn CompletionBackend + Send>)
                    }));
                    RunMode::Live
                }
            };
            let (matrix, _) = scenario::run_all(&specs, mode, &harness);
            match config.output_format {
                OutputFormat::Json => writeln!(out, "{}", matrix.to_json()),
                OutputFormat::Text => write!(out, "{}", matrix.render_text()),
            }
            .map_err(io)?;
            Ok(if matrix.gates_failure() { EXIT_NEGATIVE } else { EXIT_OK })
        }
    }
}

pub fn cmd_check(subject: &str, config: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let subject = Subject::parse(subject).ok_or_else(|| CliError::Usage("empty subject".into()))?;
    let env = config.environment("")?;
    let report = env.audit(&subject).map_err(|e| match e {
        AuditError::Shell(ShellError::FixtureMiss(cmd)) => CliError::Usage(format!("fixture missing for {cmd:?}")),
        other => CliError::Usage(other.to_string()),
    })?;
    match config.output_format {
        OutputFormat::Json => print_json(out, &report),
        OutputFormat::Text => {
            let mut text = report.render_text();
            let gaps: Vec<&str> = report.gaps().collect();
            if !gaps.is_empty() {
                text.push_str("Gaps:\n");
                for g in gaps {
                    text.push_str(&format!("- {g}\n"));
                }
            }
            write!(out, "{text}")
        }
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(match report.overall {
        Compliance::Compliant => EXIT_OK,
        Compliance::NonCompliant => EXIT_NEGATIVE,
    })
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let result = CliConfig::resolve(&cli.global).map_err(CliError::from).and_then(|config| match &cli.command {
        Command::Ask { prompt } => cmd_ask(prompt, &config, out),
        Command::Scenario { action } => cmd_scenario(action, &config, out),
        Command::Check { subject } => cmd_check(subject, &config, out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
