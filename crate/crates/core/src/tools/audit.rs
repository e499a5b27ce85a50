//! The audit environment shared by the agent's tools and the agent-free
//! `check` path, so both reach a verdict through the same code.

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use super::{
    clock_now, emit_report, read_policy_document, Clock, PolicyReadError, ReportSink, ShellError,
    ShellExecutor, SinkError, ToolError, ToolRegistry, ToolResult, ToolSpec, CURRENT_DATE,
    POLICY_READER, SEND_REPORT, WINDOWS_TASK,
};
use crate::compliance::{evaluate_account, evaluate_machine, ComplianceReport, EvalError};
use crate::parsers::{parse_net_accounts, parse_net_user, DateFormatConfig, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subject {
    Machine,
    Account(String),
}

impl Subject {
    /// `machine` (any case) audits the host's settings; anything else names
    /// an account. Tool input like `"user Penny"` resolves to `Penny`.
    pub fn parse(input: &str) -> Option<Self> {
        let head = input.split('|').next().unwrap_or("");
        let cleaned = head.trim().trim_matches(|c| c == '"' || c == '\'').trim();
        if cleaned.is_empty() {
            return None;
        }
        let lower = cleaned.to_ascii_lowercase();
        if matches!(lower.as_str(), "machine" | "this machine" | "local machine" | "localhost") {
            return Some(Subject::Machine);
        }
        let name = cleaned
            .split_whitespace()
            .last()?
            .trim_matches(|c: char| !(c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-'));
        (!name.is_empty()).then(|| Subject::Account(name.to_string()))
    }

    pub fn command(&self) -> String {
        match self {
            Subject::Machine => "net accounts".to_string(),
            Subject::Account(name) => format!("net user {name}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Shell(#[from] ShellError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Policy(#[from] PolicyReadError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Everything the tools are bound to for one audit session.
pub struct AuditEnvironment {
    pub shell: Arc<ShellExecutor>,
    pub policy_path: PathBuf,
    pub clock: Clock,
    pub date_format: DateFormatConfig,
    pub sink: Arc<dyn ReportSink>,
    pub task_query: String,
}

impl AuditEnvironment {
    /// Collects the subject's settings, parses them and evaluates them
    /// against the policy document. No model is involved.
    pub fn audit(&self, subject: &Subject) -> Result<ComplianceReport, AuditError> {
        let policy = read_policy_document(&self.policy_path)?;
        let output = self.shell.run(&subject.command())?;
        let today = self.clock.today();
        let report = match subject {
            Subject::Machine => evaluate_machine(&parse_net_accounts(&output)?, &policy, today)?,
            Subject::Account(_) => {
                evaluate_account(&parse_net_user(&output, &self.date_format)?, &policy, today)?
            }
        };
        Ok(report.with_task_query(self.task_query.clone()))
    }
}

/// Registers the four audit tools: `WindowsTask`, `PolicyReader`,
/// `CurrentDate` and `SendReport`.
pub fn standard_registry(env: Arc<AuditEnvironment>) -> ToolRegistry {
    let mut reg = ToolRegistry::new();

    let shell = env.shell.clone();
    let allowed = shell
        .policy()
        .allowlist
        .iter()
        .map(|p| p.as_str().to_string())
        .collect::<Vec<_>>()
        .join(", ");
    reg.register(ToolSpec::new(
        WINDOWS_TASK,
        format!(
            "Runs a Windows shell command on the audited machine and returns its output. \
             Allowed commands: {allowed}. Input: the command line."
        ),
        move |input| shell.execute(input),
    ))
    .expect("fresh registry");

    let policy_env = env.clone();
    reg.register(ToolSpec::new(
        POLICY_READER,
        "Reads the CIS password policy document and returns its requirements as a rule list. \
         Input: ignored.",
        move |_| {
            Ok(match read_policy_document(&policy_env.policy_path) {
                Ok(set) => ToolResult::ok(set.render()),
                Err(e) => ToolResult::error(e.to_string()),
            })
        },
    ))
    .expect("fresh registry");

    let clock = env.clock;
    reg.register(ToolSpec::new(
        CURRENT_DATE,
        "Returns today's date as YYYY-MM-DD. Input: ignored.",
        move |_| Ok(ToolResult::ok(clock_now(clock.is_fixed().then(|| clock.today())))),
    ))
    .expect("fresh registry");

    let report_env = env;
    reg.register(ToolSpec::new(
        SEND_REPORT,
        "Audits a subject against the password policy and sends the compliance report \
         (binary answer plus gaps) to the audit trail. Input: an account name, or 'machine'.",
        move |input| {
            let Some(subject) = Subject::parse(input) else {
                return Ok(ToolResult::error("expected an account name or 'machine'"));
            };
            let report = match report_env.audit(&subject) {
                Ok(r) => r,
                Err(e) => return Ok(ToolResult::error(format!("audit failed: {e}"))),
            };
            match emit_report(&report, report_env.sink.as_ref()) {
                Ok(receipt) => Ok(ToolResult::ok(format!(
                    "Report delivered to {}: {} ({} gap(s))",
                    receipt.location,
                    match report.overall {
                        crate::compliance::Compliance::Compliant => "COMPLIANT",
                        crate::compliance::Compliance::NonCompliant => "NON-COMPLIANT",
                    },
                    report.gaps().count()
                ))),
                Err(e @ SinkError::SinkUnavailable(_)) => Err(ToolError::new(SEND_REPORT, e.to_string())),
                Err(e) => Ok(ToolResult::error(e.to_string())),
            }
        },
    ))
    .expect("fresh registry");

    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{FileSink, ShellPolicy};
    use chrono::NaiveDate;

    #[test]
    fn subject_parsing() {
        assert_eq!(Subject::parse("machine"), Some(Subject::Machine));
        assert_eq!(Subject::parse("\"This Machine\""), Some(Subject::Machine));
        assert_eq!(Subject::parse("Penny"), Some(Subject::Account("Penny".into())));
        assert_eq!(Subject::parse("user \"Penny\" | non-compliant"), Some(Subject::Account("Penny".into())));
        assert_eq!(Subject::parse("  "), None);
    }

    fn env(dir: &std::path::Path) -> Arc<AuditEnvironment> {
        let policy = dir.join("policy.txt");
        std::fs::write(&policy, "rule A1: password_last_set_within_days <= 90\nrule R1: min_password_length >= 14\n").unwrap();
        Arc::new(AuditEnvironment {
            shell: Arc::new(ShellExecutor::new(ShellPolicy::fixture([
                ("net user Penny", "User name  Penny\nPassword last set  20/06/2019\n"),
                ("net accounts", "Minimum password age (days): 1\nMaximum password age (days): 90\nMinimum password length: 14\nLength of password history maintained: 24\nLockout threshold: 5\nLockout duration (minutes): 15\nLockout observation window (minutes): 15\n"),
            ]))),
            policy_path: policy,
            clock: Clock::fixed(NaiveDate::from_ymd_opt(2024, 12, 1).unwrap()),
            date_format: DateFormatConfig::default(),
            sink: Arc::new(FileSink::new(dir.join("reports"))),
            task_query: "audit".into(),
        })
    }

    #[test]
    fn audit_shares_the_oracle_path() {
        let dir = tempfile::tempdir().unwrap();
        let env = env(dir.path());
        let penny = env.audit(&Subject::Account("Penny".into())).unwrap();
        assert_eq!(penny.overall, crate::compliance::Compliance::NonCompliant);
        assert_eq!(penny.task_query, "audit");
        let machine = env.audit(&Subject::Machine).unwrap();
        assert_eq!(machine.overall, crate::compliance::Compliance::Compliant);
        assert!(matches!(
            env.audit(&Subject::Account("Ghost".into())),
            Err(AuditError::Shell(ShellError::FixtureMiss(_)))
        ));
    }

    #[test]
    fn standard_tools() {
        let dir = tempfile::tempdir().unwrap();
        let reg = standard_registry(env(dir.path()));
        assert_eq!(reg.names(), vec![WINDOWS_TASK, POLICY_READER, CURRENT_DATE, SEND_REPORT]);

        let date = (reg.lookup(CURRENT_DATE).unwrap().handler)("").unwrap();
        assert_eq!(date.output, "2024-12-01");

        let policy = (reg.lookup(POLICY_READER).unwrap().handler)("").unwrap();
        assert!(policy.output.contains("min_password_length >= 14"));

        let sent = (reg.lookup(SEND_REPORT).unwrap().handler)("Penny").unwrap();
        assert!(!sent.is_error);
        assert!(sent.output.contains("NON-COMPLIANT (1 gap(s))"));

        let missing = (reg.lookup(SEND_REPORT).unwrap().handler)("Ghost").unwrap();
        assert!(missing.is_error);
    }
}
