//! Deterministic password-policy evaluation.
//!
//! Rules compare one observed quantity against an integer threshold. The
//! evaluators here are the ground truth an agent's answer is graded
//! against, and the same code backs the `check` command.
//!
//! Sentinel values reported by Windows normalize to +infinity: an
//! `Unlimited` maximum password age and a `Never` lockout threshold fail
//! every `AtMost` rule and satisfy every `AtLeast` rule. A history length
//! of `None` means no passwords are remembered and reads as 0.

mod policy_text;

pub use policy_text::parse_policy_text;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parsers::{
    AccountInfo, HistoryLength, LockoutThreshold, MachinePasswordSettings, MaxPasswordAge,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    MaxPasswordAgeDays,
    MinPasswordAgeDays,
    MinPasswordLength,
    PasswordHistoryLength,
    LockoutThreshold,
    LockoutDurationMinutes,
    PasswordLastSetWithinDays,
}

impl Parameter {
    pub const ALL: [Parameter; 7] = [
        Parameter::MaxPasswordAgeDays,
        Parameter::MinPasswordAgeDays,
        Parameter::MinPasswordLength,
        Parameter::PasswordHistoryLength,
        Parameter::LockoutThreshold,
        Parameter::LockoutDurationMinutes,
        Parameter::PasswordLastSetWithinDays,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::MaxPasswordAgeDays => "max_password_age_days",
            Parameter::MinPasswordAgeDays => "min_password_age_days",
            Parameter::MinPasswordLength => "min_password_length",
            Parameter::PasswordHistoryLength => "password_history_length",
            Parameter::LockoutThreshold => "lockout_threshold",
            Parameter::LockoutDurationMinutes => "lockout_duration_minutes",
            Parameter::PasswordLastSetWithinDays => "password_last_set_within_days",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    pub fn scope(self) -> Scope {
        match self {
            Parameter::PasswordLastSetWithinDays => Scope::Account,
            _ => Scope::Machine,
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    AtMost,
    AtLeast,
    Equals,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::AtMost => "<=",
            Comparator::AtLeast => ">=",
            Comparator::Equals => "==",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "<=" => Some(Comparator::AtMost),
            ">=" => Some(Comparator::AtLeast),
            "==" | "=" => Some(Comparator::Equals),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    Account,
    Machine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub rule_id: String,
    pub title: String,
    pub parameter: Parameter,
    pub comparator: Comparator,
    pub threshold: u32,
    pub scope: Scope,
}

impl PolicyRule {
    /// Builds a rule with the scope implied by its parameter.
    pub fn new(
        rule_id: impl Into<String>,
        title: impl Into<String>,
        parameter: Parameter,
        comparator: Comparator,
        threshold: u32,
    ) -> Self {
        Self {
            rule_id: rule_id.into(),
            title: title.into(),
            parameter,
            comparator,
            threshold,
            scope: parameter.scope(),
        }
    }

    pub fn expected(&self) -> String {
        format!("{} {}", self.comparator.symbol(), self.threshold)
    }
}

impl fmt::Display for PolicyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {} ({:?})",
            self.rule_id,
            self.parameter,
            self.expected(),
            self.scope
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySet {
    pub source_id: String,
    pub rules: Vec<PolicyRule>,
}

impl PolicySet {
    pub fn new(source_id: impl Into<String>, rules: Vec<PolicyRule>) -> Self {
        Self {
            source_id: source_id.into(),
            rules,
        }
    }

    pub fn rules_in(&self, scope: Scope) -> impl Iterator<Item = &PolicyRule> {
        self.rules.iter().filter(move |r| r.scope == scope)
    }

    /// Human-readable rule list, one rule per line.
    pub fn render(&self) -> String {
        let mut out = format!("Policy {} ({} rules)\n", self.source_id, self.rules.len());
        for r in &self.rules {
            out.push_str(&format!("- {r}: {}\n", r.title));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule_id: String,
    pub observed: String,
    pub expected: String,
    pub compliant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compliance {
    Compliant,
    NonCompliant,
}

impl Compliance {
    pub fn label(self) -> &'static str {
        match self {
            Compliance::Compliant => "Compliant",
            Compliance::NonCompliant => "Non-Compliant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub schema_version: u32,
    pub subject: String,
    pub audit_date: NaiveDate,
    pub verdicts: Vec<Verdict>,
    pub overall: Compliance,
    pub task_query: String,
}

impl ComplianceReport {
    fn from_verdicts(subject: impl Into<String>, audit_date: NaiveDate, verdicts: Vec<Verdict>) -> Self {
        let overall = if verdicts.iter().all(|v| v.compliant) {
            Compliance::Compliant
        } else {
            Compliance::NonCompliant
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            subject: subject.into(),
            audit_date,
            verdicts,
            overall,
            task_query: String::new(),
        }
    }

    pub fn with_task_query(mut self, task_query: impl Into<String>) -> Self {
        self.task_query = task_query.into();
        self
    }

    pub fn gaps(&self) -> impl Iterator<Item = &str> {
        self.verdicts.iter().filter_map(|v| v.gap.as_deref())
    }

    /// Checks the verdict/gap and overall/conjunction invariants.
    pub fn is_well_formed(&self) -> bool {
        let gaps_ok = self.verdicts.iter().all(|v| v.gap.is_some() != v.compliant);
        let all = self.verdicts.iter().all(|v| v.compliant);
        gaps_ok && (self.overall == Compliance::Compliant) == all
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "{}\nSubject: {}\nAudit date: {}\n",
            match self.overall {
                Compliance::Compliant => "COMPLIANT",
                Compliance::NonCompliant => "NON-COMPLIANT",
            },
            self.subject,
            self.audit_date
        );
        if !self.task_query.is_empty() {
            out.push_str(&format!("Task: {}\n", self.task_query));
        }
        for v in &self.verdicts {
            out.push_str(&format!(
                "  [{}] {}: observed {}, expected {}\n",
                if v.compliant { "PASS" } else { "FAIL" },
                v.rule_id,
                v.observed,
                v.expected
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("password last set {last_set} is after the audit date {audit_date}")]
    FutureDate {
        last_set: NaiveDate,
        audit_date: NaiveDate,
    },
    #[error("rule {rule_id}: parameter {parameter} cannot be evaluated in {scope:?} scope")]
    UnknownParameter {
        rule_id: String,
        parameter: Parameter,
        scope: Scope,
    },
}

/// An observed quantity on the extended non-negative integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observed {
    Finite(u64),
    Infinite(&'static str),
    Unavailable,
}

impl Observed {
    pub fn satisfies(self, comparator: Comparator, threshold: u32) -> bool {
        let t = u64::from(threshold);
        match (self, comparator) {
            (Observed::Unavailable, _) => false,
            (Observed::Finite(v), Comparator::AtMost) => v <= t,
            (Observed::Finite(v), Comparator::AtLeast) => v >= t,
            (Observed::Finite(v), Comparator::Equals) => v == t,
            (Observed::Infinite(_), Comparator::AtLeast) => true,
            (Observed::Infinite(_), _) => false,
        }
    }

    fn render(self) -> String {
        match self {
            Observed::Finite(v) => v.to_string(),
            Observed::Infinite(word) => word.to_string(),
            Observed::Unavailable => "value unavailable".to_string(),
        }
    }
}

fn verdict(rule: &PolicyRule, observed: Observed) -> Verdict {
    let compliant = observed.satisfies(rule.comparator, rule.threshold);
    let expected = rule.expected();
    let observed_text = observed.render();
    let gap = (!compliant).then(|| {
        format!(
            "{} ({}): observed {}, expected {}",
            rule.parameter, rule.rule_id, observed_text, expected
        )
    });
    Verdict {
        rule_id: rule.rule_id.clone(),
        observed: observed_text,
        expected,
        compliant,
        gap,
    }
}

pub fn machine_observation(settings: &MachinePasswordSettings, parameter: Parameter) -> Option<Observed> {
    let finite = |v: u32| Observed::Finite(u64::from(v));
    Some(match parameter {
        Parameter::MaxPasswordAgeDays => match settings.max_password_age_days {
            MaxPasswordAge::Days(d) => finite(d),
            MaxPasswordAge::Unlimited => Observed::Infinite("Unlimited"),
        },
        Parameter::MinPasswordAgeDays => finite(settings.min_password_age_days),
        Parameter::MinPasswordLength => finite(settings.min_password_length),
        Parameter::PasswordHistoryLength => match settings.password_history_length {
            HistoryLength::Count(n) => finite(n),
            HistoryLength::None => Observed::Finite(0),
        },
        Parameter::LockoutThreshold => match settings.lockout_threshold {
            LockoutThreshold::Attempts(n) => finite(n),
            LockoutThreshold::Never => Observed::Infinite("Never"),
        },
        Parameter::LockoutDurationMinutes => finite(settings.lockout_duration_minutes),
        Parameter::PasswordLastSetWithinDays => return None,
    })
}

/// Evaluates every machine-scope rule against `net accounts` settings.
pub fn evaluate_machine(
    settings: &MachinePasswordSettings,
    rules: &PolicySet,
    audit_date: NaiveDate,
) -> Result<ComplianceReport, EvalError> {
    let verdicts = rules
        .rules_in(Scope::Machine)
        .map(|rule| {
            let observed = machine_observation(settings, rule.parameter).ok_or_else(|| {
                EvalError::UnknownParameter {
                    rule_id: rule.rule_id.clone(),
                    parameter: rule.parameter,
                    scope: Scope::Machine,
                }
            })?;
            Ok(verdict(rule, observed))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComplianceReport::from_verdicts("machine", audit_date, verdicts))
}

/// Evaluates every account-scope rule. Password age is counted in whole
/// calendar days and the threshold is inclusive: 90 days old passes a
/// 90-day rule.
pub fn evaluate_account(
    account: &AccountInfo,
    rules: &PolicySet,
    audit_date: NaiveDate,
) -> Result<ComplianceReport, EvalError> {
    let age = match account.password_last_set {
        Some(last_set) if last_set > audit_date => {
            return Err(EvalError::FutureDate {
                last_set,
                audit_date,
            })
        }
        Some(last_set) => Observed::Finite((audit_date - last_set).num_days() as u64),
        None => Observed::Unavailable,
    };
    let verdicts = rules
        .rules_in(Scope::Account)
        .map(|rule| match rule.parameter {
            Parameter::PasswordLastSetWithinDays => Ok(verdict(rule, age)),
            other => Err(EvalError::UnknownParameter {
                rule_id: rule.rule_id.clone(),
                parameter: other,
                scope: Scope::Account,
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComplianceReport::from_verdicts(
        account.username.clone(),
        audit_date,
        verdicts,
    ))
}
