#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use audit_agent::compliance::{Comparator, Parameter, PolicyRule, PolicySet};
use audit_agent::parsers::{HistoryLength, LockoutThreshold, MachinePasswordSettings, MaxPasswordAge};
use audit_agent::tools::{
    standard_registry, AuditEnvironment, Clock, FileSink, ShellExecutor, ShellPolicy, ToolRegistry,
};
use chrono::NaiveDate;
use proptest::prelude::*;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures_dir() -> PathBuf {
    repo_root().join("fixtures")
}

pub fn scenarios_dir() -> PathBuf {
    repo_root().join("scenarios")
}

pub fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn audit_day() -> NaiveDate {
    ymd(2024, 12, 1)
}

/// Fixture-backed tools with the shipped corpus and a fixed clock.
pub fn fixture_registry(report_dir: &std::path::Path) -> ToolRegistry {
    let map = audit_agent::scenario::load_command_map(&fixtures_dir(), "net_accounts_before.txt").unwrap();
    let env = AuditEnvironment {
        shell: Arc::new(ShellExecutor::new(ShellPolicy::fixture(map))),
        policy_path: fixtures_dir().join("cis_password_policy.txt"),
        clock: Clock::fixed(audit_day()),
        date_format: Default::default(),
        sink: Arc::new(FileSink::new(report_dir)),
        task_query: String::new(),
    };
    standard_registry(Arc::new(env))
}

pub fn machine_parameters() -> Vec<Parameter> {
    Parameter::ALL
        .into_iter()
        .filter(|p| *p != Parameter::PasswordLastSetWithinDays)
        .collect()
}

pub fn arb_settings() -> impl Strategy<Value = MachinePasswordSettings> {
    (
        0u32..200,
        prop_oneof![(0u32..1000).prop_map(MaxPasswordAge::Days), Just(MaxPasswordAge::Unlimited)],
        0u32..30,
        prop_oneof![(0u32..30).prop_map(HistoryLength::Count), Just(HistoryLength::None)],
        prop_oneof![(0u32..20).prop_map(LockoutThreshold::Attempts), Just(LockoutThreshold::Never)],
        0u32..120,
        0u32..120,
    )
        .prop_map(|(min_age, max_age, len, hist, thr, dur, win)| MachinePasswordSettings {
            min_password_age_days: min_age,
            max_password_age_days: max_age,
            min_password_length: len,
            password_history_length: hist,
            lockout_threshold: thr,
            lockout_duration_minutes: dur,
            lockout_window_minutes: win,
        })
}

pub fn arb_comparator() -> impl Strategy<Value = Comparator> {
    prop_oneof![Just(Comparator::AtMost), Just(Comparator::AtLeast), Just(Comparator::Equals)]
}

pub fn arb_machine_policy() -> impl Strategy<Value = PolicySet> {
    let params = machine_parameters();
    proptest::collection::vec((0..params.len(), arb_comparator(), 0u32..1000), 1..10).prop_map(move |raw| {
        let rules = raw
            .into_iter()
            .enumerate()
            .map(|(i, (p, c, t))| PolicyRule::new(format!("R{i}"), "generated", params[p], c, t))
            .collect();
        PolicySet::new("generated", rules)
    })
}
