//! Parsers for the text printed by `net user <name>` and `net accounts`.
//!
//! Both commands print one `label  value` pair per line. Labels are matched
//! case-insensitively after trimming; lines with unknown labels (group
//! memberships, logon scripts, the trailing "command completed" line) are
//! skipped, since the exact set varies across Windows versions.

mod date;
mod net_accounts;
mod net_user;

pub use date::{DateFormatConfig, DateOrder};
pub use net_accounts::{
    parse_net_accounts, render_net_accounts, HistoryLength, LockoutThreshold, MachinePasswordSettings,
    MaxPasswordAge,
};
pub use net_user::{parse_net_user, render_net_user, AccountInfo, DateOrNever};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no \"User name\" line found")]
    MissingUserName,
    #[error("{label}: cannot parse {value:?} as a date")]
    UnparseableDate { label: String, value: String },
    #[error("required field {0:?} is missing")]
    MissingField(&'static str),
    #[error("{label}: cannot parse {value:?}")]
    InvalidValue { label: &'static str, value: String },
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
}

/// If `line` starts with `label` (ASCII case-insensitive) followed by a
/// separator (whitespace, `:` or end of line), returns the trimmed value.
pub(crate) fn match_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let line = line.trim();
    let head = line.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = &line[label.len()..];
    if rest.is_empty() {
        return Some("");
    }
    let first = rest.chars().next()?;
    if first != ':' && !first.is_whitespace() {
        return None;
    }
    Some(rest.trim_start_matches(':').trim())
}
