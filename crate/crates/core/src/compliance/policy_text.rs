//! Rule extraction from policy-document text.
//!
//! Two passes over the text:
//!
//! 1. Canonical lines, parsed exactly:
//!    `rule <id>: <parameter> <= | >= | == <integer> [scope=<Account|Machine>]`.
//!    A canonical line whose explicit scope disagrees with its parameter is
//!    skipped.
//! 2. Prose lines (benchmark-style recommendations). A line yields a rule
//!    when it names a parameter and carries a threshold phrase:
//!
//! | parameter phrase                               | parameter                       |
//! |------------------------------------------------|---------------------------------|
//! | "maximum password age"                         | `max_password_age_days`         |
//! | "minimum password age"                         | `min_password_age_days`         |
//! | "minimum password length"                      | `min_password_length`           |
//! | "password history"                             | `password_history_length`       |
//! | "lockout threshold"                            | `lockout_threshold`             |
//! | "lockout duration"                             | `lockout_duration_minutes`      |
//! | "password last set", "password changed", "changed password" | `password_last_set_within_days` |
//!
//! | threshold phrase                                          | comparator |
//! |-----------------------------------------------------------|------------|
//! | "N or fewer", "N or less", "at most N", "no more than N", "within the last/past N" | `AtMost` |
//! | "N or more", "N or greater", "at least N", "no less than N", "no fewer than N"     | `AtLeast` |
//! | "exactly N"                                               | `Equals`   |
//!
//! The earliest threshold phrase on the line wins. A prose rule takes its
//! id from a leading section number (`1.1.2`) when present, else `P<n>`.
//! Across both passes, a later rule with the same (parameter, comparator)
//! or the same id as an earlier one is dropped.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::{Comparator, Parameter, PolicyRule, PolicySet, Scope};

static CANONICAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*rule\s+([A-Za-z0-9._-]+)\s*:\s*([a-z_]+)\s*(<=|>=|==|=)\s*(\d+)\s*(?:scope\s*=\s*(account|machine))?\s*$",
    )
    .unwrap()
});

static SECTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(\d+(?:\.\d+)+)\b").unwrap());

static THRESHOLDS: LazyLock<Vec<(Regex, Comparator)>> = LazyLock::new(|| {
    [
        (r"(\d+)\s+or\s+(?:fewer|less|lower)\b", Comparator::AtMost),
        (r"\b(?:at\s+most|no\s+more\s+than)\s+(\d+)", Comparator::AtMost),
        (r"\bwithin\s+the\s+(?:last|past)\s+(\d+)", Comparator::AtMost),
        (r"(\d+)\s+or\s+(?:more|greater|higher)\b", Comparator::AtLeast),
        (r"\b(?:at\s+least|no\s+less\s+than|no\s+fewer\s+than)\s+(\d+)", Comparator::AtLeast),
        (r"\bexactly\s+(\d+)", Comparator::Equals),
    ]
    .into_iter()
    .map(|(p, c)| (Regex::new(&format!("(?i){p}")).unwrap(), c))
    .collect()
});

const PARAMETER_PHRASES: &[(&str, Parameter)] = &[
    ("maximum password age", Parameter::MaxPasswordAgeDays),
    ("minimum password age", Parameter::MinPasswordAgeDays),
    ("minimum password length", Parameter::MinPasswordLength),
    ("password history", Parameter::PasswordHistoryLength),
    ("lockout threshold", Parameter::LockoutThreshold),
    ("lockout duration", Parameter::LockoutDurationMinutes),
    ("password last set", Parameter::PasswordLastSetWithinDays),
    ("password changed", Parameter::PasswordLastSetWithinDays),
    ("changed password", Parameter::PasswordLastSetWithinDays),
    ("changed their password", Parameter::PasswordLastSetWithinDays),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no policy rules could be extracted from {source_id}")]
pub struct NoRulesExtracted {
    pub source_id: String,
}

fn canonical_rule(line: &str) -> Option<PolicyRule> {
    let caps = CANONICAL.captures(line)?;
    let parameter = Parameter::from_name(&caps[2])?;
    let comparator = Comparator::from_symbol(&caps[3])?;
    let threshold: u32 = caps[4].parse().ok()?;
    if let Some(scope) = caps.get(5) {
        let scope = if scope.as_str().eq_ignore_ascii_case("account") {
            Scope::Account
        } else {
            Scope::Machine
        };
        if scope != parameter.scope() {
            return None;
        }
    }
    Some(PolicyRule::new(&caps[1], line.trim(), parameter, comparator, threshold))
}

fn prose_rule(line: &str, ordinal: usize) -> Option<PolicyRule> {
    let lower = line.to_ascii_lowercase();
    let parameter = PARAMETER_PHRASES
        .iter()
        .find(|(phrase, _)| lower.contains(phrase))
        .map(|(_, p)| *p)?;
    let (comparator, threshold) = THRESHOLDS
        .iter()
        .filter_map(|(re, cmp)| {
            let caps = re.captures(line)?;
            let start = caps.get(0)?.start();
            let n: u32 = caps[1].parse().ok()?;
            Some((start, *cmp, n))
        })
        .min_by_key(|(start, _, _)| *start)
        .map(|(_, c, n)| (c, n))?;
    let rule_id = SECTION
        .captures(line)
        .map(|c| c[1].to_string())
        .unwrap_or_else(|| format!("P{ordinal}"));
    Some(PolicyRule::new(rule_id, line.trim(), parameter, comparator, threshold))
}

/// Extracts a [`PolicySet`] from policy-document text.
pub fn parse_policy_text(text: &str, source_id: &str) -> Result<PolicySet, NoRulesExtracted> {
    let mut candidates: Vec<PolicyRule> = text.lines().filter_map(canonical_rule).collect();
    let mut ordinal = 0;
    for line in text.lines() {
        if CANONICAL.is_match(line) || line.trim_start().to_ascii_lowercase().starts_with("rule ") {
            continue;
        }
        if let Some(rule) = prose_rule(line, ordinal + 1) {
            ordinal += 1;
            candidates.push(rule);
        }
    }

    let mut seen_keys = HashSet::new();
    let mut seen_ids = HashSet::new();
    let rules: Vec<PolicyRule> = candidates
        .into_iter()
        .filter(|r| {
            let key = (r.parameter, r.comparator);
            if seen_keys.contains(&key) || seen_ids.contains(&r.rule_id) {
                return false;
            }
            seen_keys.insert(key);
            seen_ids.insert(r.rule_id.clone());
            true
        })
        .collect();

    if rules.is_empty() {
        return Err(NoRulesExtracted {
            source_id: source_id.to_string(),
        });
    }
    Ok(PolicySet::new(source_id, rules))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only(text: &str) -> PolicyRule {
        let set = parse_policy_text(text, "t").unwrap();
        assert_eq!(set.rules.len(), 1, "{:?}", set.rules);
        set.rules.into_iter().next().unwrap()
    }

    #[test]
    fn canonical_line() {
        let r = only("rule R1: max_password_age_days <= 90");
        assert_eq!(r.rule_id, "R1");
        assert_eq!(r.parameter, Parameter::MaxPasswordAgeDays);
        assert_eq!(r.comparator, Comparator::AtMost);
        assert_eq!(r.threshold, 90);
        assert_eq!(r.scope, Scope::Machine);
    }

    #[test]
    fn canonical_with_scope() {
        let r = only("rule A1: password_last_set_within_days <= 90 scope=Account");
        assert_eq!(r.scope, Scope::Account);
        assert!(parse_policy_text("rule A1: password_last_set_within_days <= 90 scope=Machine", "t").is_err());
    }

    #[test]
    fn prose_min_length() {
        let r = only("Ensure minimum password length is set to 14 or more characters");
        assert_eq!(
            (r.parameter, r.comparator, r.threshold),
            (Parameter::MinPasswordLength, Comparator::AtLeast, 14)
        );
        assert_eq!(r.rule_id, "P1");
    }

    #[test]
    fn prose_max_age() {
        let r = only("ensure maximum password age is set to 90 or fewer days");
        assert_eq!(
            (r.parameter, r.comparator, r.threshold),
            (Parameter::MaxPasswordAgeDays, Comparator::AtMost, 90)
        );
    }

    #[test]
    fn benchmark_style_line_keeps_section_id() {
        let r = only("1.2.2 (L1) Ensure 'Account lockout threshold' is set to '5 or fewer invalid logon attempt(s), but not 0' (Automated)");
        assert_eq!(r.rule_id, "1.2.2");
        assert_eq!(
            (r.parameter, r.comparator, r.threshold),
            (Parameter::LockoutThreshold, Comparator::AtMost, 5)
        );
    }

    #[test]
    fn other_phrasings() {
        let r = only("Passwords must be at least 12 characters (minimum password length)");
        assert_eq!((r.comparator, r.threshold), (Comparator::AtLeast, 12));
        let r = only("The password changed within the last 30 days");
        assert_eq!(
            (r.parameter, r.comparator, r.threshold),
            (Parameter::PasswordLastSetWithinDays, Comparator::AtMost, 30)
        );
        let r = only("Lockout duration must be exactly 30 minutes");
        assert_eq!(r.comparator, Comparator::Equals);
    }

    #[test]
    fn duplicates_keep_first() {
        let set = parse_policy_text(
            "rule R1: min_password_length >= 14\nEnsure minimum password length is 8 or more\nrule R2: min_password_length >= 10\n",
            "t",
        )
        .unwrap();
        assert_eq!(set.rules.len(), 1);
        assert_eq!(set.rules[0].threshold, 14);
    }

    #[test]
    fn headings_only_yield_nothing() {
        let err = parse_policy_text("Password Policy\n1.1 Account Policies\n\nLockout\n", "doc").unwrap_err();
        assert_eq!(err.source_id, "doc");
        assert!(parse_policy_text("", "empty").is_err());
    }

    #[test]
    fn parameter_without_threshold_is_ignored() {
        assert!(parse_policy_text("Review the maximum password age regularly.", "t").is_err());
    }
}
