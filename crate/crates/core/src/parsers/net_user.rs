use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{match_label, DateFormatConfig, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateOrNever {
    Date(NaiveDate),
    Never,
}

/// The fields of `net user <name>` relevant to a password audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountInfo {
    pub username: String,
    pub password_last_set: Option<NaiveDate>,
    pub password_expires: Option<DateOrNever>,
    pub password_changeable: Option<NaiveDate>,
    pub password_required: bool,
    pub account_active: bool,
    pub last_logon: Option<DateOrNever>,
}

const USER_NAME: &str = "User name";
const ACCOUNT_ACTIVE: &str = "Account active";
const PASSWORD_LAST_SET: &str = "Password last set";
const PASSWORD_EXPIRES: &str = "Password expires";
const PASSWORD_CHANGEABLE: &str = "Password changeable";
const PASSWORD_REQUIRED: &str = "Password required";
const LAST_LOGON: &str = "Last logon";

fn date(label: &str, value: &str, fmt: &DateFormatConfig) -> Result<NaiveDate, ParseError> {
    fmt.parse(value).ok_or_else(|| ParseError::UnparseableDate {
        label: label.to_string(),
        value: value.to_string(),
    })
}

fn date_or_never(label: &str, value: &str, fmt: &DateFormatConfig) -> Result<DateOrNever, ParseError> {
    if value.eq_ignore_ascii_case("never") {
        Ok(DateOrNever::Never)
    } else {
        date(label, value, fmt).map(DateOrNever::Date)
    }
}

fn yes(value: &str) -> bool {
    value.eq_ignore_ascii_case("yes")
}

/// Parses `net user <name>` output. Absent Yes/No lines read as `false`.
pub fn parse_net_user(text: &str, fmt: &DateFormatConfig) -> Result<AccountInfo, ParseError> {
    let mut username = None;
    let mut info = AccountInfo {
        username: String::new(),
        password_last_set: None,
        password_expires: None,
        password_changeable: None,
        password_required: false,
        account_active: false,
        last_logon: None,
    };

    for line in text.lines() {
        if let Some(v) = match_label(line, USER_NAME) {
            if !v.is_empty() && username.is_none() {
                username = Some(v.to_string());
            }
        } else if let Some(v) = match_label(line, ACCOUNT_ACTIVE) {
            info.account_active = yes(v);
        } else if let Some(v) = match_label(line, PASSWORD_LAST_SET) {
            // "Never" here means the password was never set.
            if !v.eq_ignore_ascii_case("never") {
                info.password_last_set = Some(date(PASSWORD_LAST_SET, v, fmt)?);
            }
        } else if let Some(v) = match_label(line, PASSWORD_EXPIRES) {
            info.password_expires = Some(date_or_never(PASSWORD_EXPIRES, v, fmt)?);
        } else if let Some(v) = match_label(line, PASSWORD_CHANGEABLE) {
            info.password_changeable = Some(date(PASSWORD_CHANGEABLE, v, fmt)?);
        } else if let Some(v) = match_label(line, PASSWORD_REQUIRED) {
            info.password_required = yes(v);
        } else if let Some(v) = match_label(line, LAST_LOGON) {
            info.last_logon = Some(date_or_never(LAST_LOGON, v, fmt)?);
        }
    }

    info.username = username.ok_or(ParseError::MissingUserName)?;
    if let (Some(set), Some(changeable)) = (info.password_last_set, info.password_changeable) {
        if set > changeable {
            return Err(ParseError::Inconsistent(format!(
                "password last set {set} is after password changeable {changeable}"
            )));
        }
    }
    Ok(info)
}

/// Renders an [`AccountInfo`] in the `net user` label/value layout.
pub fn render_net_user(info: &AccountInfo, fmt: &DateFormatConfig) -> String {
    let yes_no = |b: bool| if b { "Yes" } else { "No" };
    let don = |d: &DateOrNever| match d {
        DateOrNever::Date(d) => fmt.format(*d),
        DateOrNever::Never => "Never".to_string(),
    };
    let mut out = String::new();
    let mut line = |label: &str, value: String| {
        out.push_str(&format!("{label:<29}{value}\n"));
    };
    line(USER_NAME, info.username.clone());
    line(ACCOUNT_ACTIVE, yes_no(info.account_active).into());
    line(
        PASSWORD_LAST_SET,
        info.password_last_set
            .map(|d| fmt.format(d))
            .unwrap_or_else(|| "Never".into()),
    );
    if let Some(d) = &info.password_expires {
        line(PASSWORD_EXPIRES, don(d));
    }
    if let Some(d) = info.password_changeable {
        line(PASSWORD_CHANGEABLE, fmt.format(d));
    }
    line(PASSWORD_REQUIRED, yes_no(info.password_required).into());
    if let Some(d) = &info.last_logon {
        line(LAST_LOGON, don(d));
    }
    out.push_str("The command completed successfully.\n");
    out
}
