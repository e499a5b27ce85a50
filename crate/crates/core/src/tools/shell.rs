//! Allowlisted shell access.
//!
//! A command runs only if, after normalization, it is free of shell
//! metacharacters and matches one allowlist pattern token for token.
//! Patterns are literal words plus `<name>` placeholders, each of which
//! matches a single account-name token (`[A-Za-z0-9._-]+`).

use std::collections::BTreeMap;
use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ToolError, ToolResult, WINDOWS_TASK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShellMode {
    Live,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatternToken {
    Literal(String),
    Name,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandPattern {
    source: String,
    tokens: Vec<PatternToken>,
}

impl CommandPattern {
    pub fn parse(pattern: &str) -> Self {
        let tokens = pattern
            .split_whitespace()
            .map(|t| {
                if t.eq_ignore_ascii_case("<name>") {
                    PatternToken::Name
                } else {
                    PatternToken::Literal(t.to_string())
                }
            })
            .collect();
        Self {
            source: pattern.trim().to_string(),
            tokens,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    fn matches(&self, words: &[&str]) -> bool {
        words.len() == self.tokens.len()
            && self.tokens.iter().zip(words).all(|(tok, word)| match tok {
                PatternToken::Literal(lit) => lit.eq_ignore_ascii_case(word),
                PatternToken::Name => is_name_token(word),
            })
    }
}

fn is_name_token(word: &str) -> bool {
    !word.is_empty()
        && !word.starts_with('-')
        && word
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

fn is_plain_command(command: &str) -> bool {
    command
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, ' ' | '.' | '_' | '-'))
}

#[derive(Debug, Clone)]
pub struct ShellPolicy {
    pub allowlist: Vec<CommandPattern>,
    pub timeout_seconds: u64,
    pub mode: ShellMode,
    /// Canned output keyed by normalized command text.
    pub fixture_map: BTreeMap<String, String>,
}

impl ShellPolicy {
    pub fn default_allowlist() -> Vec<CommandPattern> {
        ["net user", "net user <name>", "net accounts"]
            .into_iter()
            .map(CommandPattern::parse)
            .collect()
    }

    pub fn live() -> Self {
        Self {
            allowlist: Self::default_allowlist(),
            timeout_seconds: 30,
            mode: ShellMode::Live,
            fixture_map: BTreeMap::new(),
        }
    }

    /// Fixture mode over `map`; keys are normalized on the way in.
    pub fn fixture<I, K, V>(map: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        Self {
            allowlist: Self::default_allowlist(),
            timeout_seconds: 30,
            mode: ShellMode::Fixture,
            fixture_map: map
                .into_iter()
                .map(|(k, v)| (normalize_command(k.as_ref()), v.into()))
                .collect(),
        }
    }

    pub fn with_allowlist<I, S>(mut self, patterns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.allowlist = patterns
            .into_iter()
            .map(|p| CommandPattern::parse(p.as_ref()))
            .collect();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_seconds == 0 {
            return Err("shell timeout must be positive".into());
        }
        if self.mode == ShellMode::Fixture && self.fixture_map.is_empty() {
            return Err("fixture mode requires a non-empty fixture map".into());
        }
        Ok(())
    }

    pub fn is_allowed(&self, command: &str) -> bool {
        let normalized = normalize_command(command);
        if normalized.is_empty() || !is_plain_command(&normalized) {
            return false;
        }
        let words: Vec<&str> = normalized.split(' ').collect();
        self.allowlist.iter().any(|p| p.matches(&words))
    }
}

/// Trims, collapses whitespace runs to one space and lowercases the first
/// word.
pub fn normalize_command(command: &str) -> String {
    let mut words = command.split_whitespace();
    let Some(first) = words.next() else {
        return String::new();
    };
    let mut out = first.to_lowercase();
    for w in words {
        out.push(' ');
        out.push_str(w);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShellError {
    #[error("command {0:?} is not on the allowlist")]
    DisallowedCommand(String),
    #[error("command timed out after {0} s")]
    Timeout(u64),
    #[error("command exited with status {code:?}")]
    NonZeroExit { code: Option<i32>, output: String },
    #[error("no fixture output for {0:?}")]
    FixtureMiss(String),
    #[error("failed to spawn shell: {0}")]
    Spawn(String),
}

/// Runs commands under a [`ShellPolicy`] and counts process spawns.
#[derive(Debug)]
pub struct ShellExecutor {
    policy: ShellPolicy,
    spawned: AtomicUsize,
}

impl ShellExecutor {
    pub fn new(policy: ShellPolicy) -> Self {
        Self {
            policy,
            spawned: AtomicUsize::new(0),
        }
    }

    pub fn policy(&self) -> &ShellPolicy {
        &self.policy
    }

    /// Number of processes spawned so far.
    pub fn spawn_count(&self) -> usize {
        self.spawned.load(Ordering::SeqCst)
    }

    pub fn run(&self, command: &str) -> Result<String, ShellError> {
        let normalized = normalize_command(command);
        if !self.policy.is_allowed(&normalized) {
            return Err(ShellError::DisallowedCommand(command.trim().to_string()));
        }
        match self.policy.mode {
            // exact key first, then a case-insensitive match
            ShellMode::Fixture => self
                .policy
                .fixture_map
                .get(&normalized)
                .or_else(|| {
                    self.policy
                        .fixture_map
                        .iter()
                        .find(|(k, _)| k.eq_ignore_ascii_case(&normalized))
                        .map(|(_, v)| v)
                })
                .cloned()
                .ok_or(ShellError::FixtureMiss(normalized)),
            ShellMode::Live => self.spawn(&normalized),
        }
    }

    fn spawn(&self, command: &str) -> Result<String, ShellError> {
        let mut cmd = if cfg!(windows) {
            let mut c = Command::new("cmd");
            c.args(["/C", command]);
            c
        } else {
            let mut c = Command::new("sh");
            c.args(["-c", command]);
            c
        };
        let mut child = cmd
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ShellError::Spawn(e.to_string()))?;
        self.spawned.fetch_add(1, Ordering::SeqCst);

        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + Duration::from_secs(self.policy.timeout_seconds);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ShellError::Timeout(self.policy.timeout_seconds));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(ShellError::Spawn(e.to_string())),
            }
        };

        let mut output = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
        output.push_str(&String::from_utf8_lossy(&err_reader.join().unwrap_or_default()));
        if status.success() {
            Ok(output)
        } else {
            Err(ShellError::NonZeroExit {
                code: status.code(),
                output,
            })
        }
    }

    /// Tool-facing wrapper. Policy refusals, missing fixtures and failed
    /// commands become error observations; timeouts and spawn failures are
    /// tool failures.
    pub fn execute(&self, command: &str) -> Result<ToolResult, ToolError> {
        match self.run(command) {
            Ok(out) => Ok(ToolResult::ok(out)),
            Err(e @ ShellError::DisallowedCommand(_)) => Ok(ToolResult::error(format!(
                "{e}. Allowed commands: {}",
                self.policy
                    .allowlist
                    .iter()
                    .map(CommandPattern::as_str)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
            Err(e @ ShellError::FixtureMiss(_)) => Ok(ToolResult::error(e.to_string())),
            Err(ShellError::NonZeroExit { code, output }) => Ok(ToolResult::error(format!(
                "command exited with status {}\n{output}",
                code.map_or("unknown".to_string(), |c| c.to_string())
            ))),
            Err(e @ (ShellError::Timeout(_) | ShellError::Spawn(_))) => {
                Err(ToolError::new(WINDOWS_TASK, e.to_string()))
            }
        }
    }
}

/// One-shot execution under `policy`.
pub fn shell_execute(command: &str, policy: &ShellPolicy) -> Result<String, ShellError> {
    ShellExecutor::new(policy.clone()).run(command)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures() -> ShellPolicy {
        ShellPolicy::fixture([
            ("net user Patrick", "User name  Patrick\nPassword last set            17/11/2024\n"),
            ("net accounts", "Minimum password length: 14\n"),
        ])
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_command("  NET   user\tPatrick "), "net user Patrick");
        assert_eq!(normalize_command(""), "");
    }

    #[test]
    fn default_allowlist_shapes() {
        let p = ShellPolicy::live();
        for ok in ["net user", "net user Patrick", "NET USER patrick.s", "net accounts", "  net   accounts "] {
            assert!(p.is_allowed(ok), "{ok}");
        }
        for bad in [
            "net user Patrick extra",
            "net accounts /maxpwage:unlimited",
            "net user Patrick /add",
            "net user -x",
            "net",
            "whoami",
            "net user Patrick & whoami",
            "net user $(id)",
            "net user `id`",
            "net user a;b",
            "",
        ] {
            assert!(!p.is_allowed(bad), "{bad}");
        }
    }

    #[test]
    fn fixture_lookup() {
        let out = shell_execute("net user Patrick", &fixtures()).unwrap();
        assert!(out.contains("Password last set            17/11/2024"));
        let out = shell_execute("Net  Accounts", &fixtures()).unwrap();
        assert!(out.contains("14"));
    }

    #[test]
    fn fixture_miss() {
        assert_eq!(
            shell_execute("net user Ghost", &fixtures()),
            Err(ShellError::FixtureMiss("net user Ghost".into()))
        );
    }

    #[test]
    fn del_is_disallowed_and_not_spawned() {
        let exec = ShellExecutor::new(ShellPolicy::live());
        assert!(matches!(exec.run("del C:\\*"), Err(ShellError::DisallowedCommand(_))));
        assert_eq!(exec.spawn_count(), 0);
        let obs = exec.execute("del C:\\*").unwrap();
        assert!(obs.is_error);
        assert!(obs.output.contains("net user <name>"));
    }

    #[test]
    fn fixture_policy_validation() {
        let mut p = fixtures();
        assert!(p.validate().is_ok());
        p.fixture_map.clear();
        assert!(p.validate().is_err());
    }

    #[cfg(unix)]
    #[test]
    fn live_mode_runs_allowlisted_command() {
        let exec = ShellExecutor::new(ShellPolicy::live().with_allowlist(["echo <name>"]));
        assert_eq!(exec.run("echo hello").unwrap(), "hello\n");
        assert_eq!(exec.spawn_count(), 1);
    }

    #[cfg(unix)]
    #[test]
    fn live_mode_nonzero_exit_keeps_output() {
        let exec = ShellExecutor::new(ShellPolicy::live().with_allowlist(["ls <name>"]));
        match exec.run("ls does-not-exist-xyz") {
            Err(ShellError::NonZeroExit { output, .. }) => assert!(!output.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
        let obs = exec.execute("ls does-not-exist-xyz").unwrap();
        assert!(obs.is_error);
    }

    #[cfg(unix)]
    #[test]
    fn live_mode_times_out() {
        let mut policy = ShellPolicy::live().with_allowlist(["sleep <name>"]);
        policy.timeout_seconds = 1;
        let exec = ShellExecutor::new(policy);
        let start = Instant::now();
        assert_eq!(exec.run("sleep 5"), Err(ShellError::Timeout(1)));
        assert!(start.elapsed() < Duration::from_secs(4));
        assert!(exec.execute("sleep 5").is_err());
    }
}
