use serde::{Deserialize, Serialize};

use super::{match_label, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxPasswordAge {
    Days(u32),
    Unlimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryLength {
    Count(u32),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockoutThreshold {
    Attempts(u32),
    Never,
}

/// Machine-wide password and lockout settings from `net accounts`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachinePasswordSettings {
    pub min_password_age_days: u32,
    pub max_password_age_days: MaxPasswordAge,
    pub min_password_length: u32,
    pub password_history_length: HistoryLength,
    pub lockout_threshold: LockoutThreshold,
    pub lockout_duration_minutes: u32,
    pub lockout_window_minutes: u32,
}

const MIN_AGE: &str = "Minimum password age (days)";
const MAX_AGE: &str = "Maximum password age (days)";
const MIN_LENGTH: &str = "Minimum password length";
const HISTORY: &str = "Length of password history maintained";
const THRESHOLD: &str = "Lockout threshold";
const DURATION: &str = "Lockout duration (minutes)";
const WINDOW: &str = "Lockout observation window (minutes)";

fn number(label: &'static str, value: &str) -> Result<u32, ParseError> {
    value.parse().map_err(|_| ParseError::InvalidValue {
        label,
        value: value.to_string(),
    })
}

fn word_or_number(label: &'static str, value: &str, word: &str) -> Result<Option<u32>, ParseError> {
    if value.eq_ignore_ascii_case(word) {
        Ok(None)
    } else {
        number(label, value).map(Some)
    }
}

pub fn parse_net_accounts(text: &str) -> Result<MachinePasswordSettings, ParseError> {
    let mut min_age = None;
    let mut max_age = None;
    let mut min_length = None;
    let mut history = None;
    let mut threshold = None;
    let mut duration = None;
    let mut window = None;

    for line in text.lines() {
        if let Some(v) = match_label(line, MIN_AGE) {
            min_age = Some(number(MIN_AGE, v)?);
        } else if let Some(v) = match_label(line, MAX_AGE) {
            max_age = Some(
                word_or_number(MAX_AGE, v, "unlimited")?
                    .map_or(MaxPasswordAge::Unlimited, MaxPasswordAge::Days),
            );
        } else if let Some(v) = match_label(line, MIN_LENGTH) {
            min_length = Some(number(MIN_LENGTH, v)?);
        } else if let Some(v) = match_label(line, HISTORY) {
            history = Some(
                word_or_number(HISTORY, v, "none")?.map_or(HistoryLength::None, HistoryLength::Count),
            );
        } else if let Some(v) = match_label(line, THRESHOLD) {
            threshold = Some(
                word_or_number(THRESHOLD, v, "never")?
                    .map_or(LockoutThreshold::Never, LockoutThreshold::Attempts),
            );
        } else if let Some(v) = match_label(line, DURATION) {
            duration = Some(number(DURATION, v)?);
        } else if let Some(v) = match_label(line, WINDOW) {
            window = Some(number(WINDOW, v)?);
        }
    }

    let settings = MachinePasswordSettings {
        min_password_age_days: min_age.ok_or(ParseError::MissingField(MIN_AGE))?,
        max_password_age_days: max_age.ok_or(ParseError::MissingField(MAX_AGE))?,
        min_password_length: min_length.ok_or(ParseError::MissingField(MIN_LENGTH))?,
        password_history_length: history.ok_or(ParseError::MissingField(HISTORY))?,
        lockout_threshold: threshold.ok_or(ParseError::MissingField(THRESHOLD))?,
        lockout_duration_minutes: duration.ok_or(ParseError::MissingField(DURATION))?,
        lockout_window_minutes: window.ok_or(ParseError::MissingField(WINDOW))?,
    };
    if let MaxPasswordAge::Days(max) = settings.max_password_age_days {
        if settings.min_password_age_days > max {
            return Err(ParseError::Inconsistent(format!(
                "minimum password age {} exceeds maximum {max}",
                settings.min_password_age_days
            )));
        }
    }
    Ok(settings)
}

/// Renders settings in the `net accounts` layout.
pub fn render_net_accounts(s: &MachinePasswordSettings) -> String {
    let max_age = match s.max_password_age_days {
        MaxPasswordAge::Days(d) => d.to_string(),
        MaxPasswordAge::Unlimited => "Unlimited".into(),
    };
    let history = match s.password_history_length {
        HistoryLength::Count(n) => n.to_string(),
        HistoryLength::None => "None".into(),
    };
    let threshold = match s.lockout_threshold {
        LockoutThreshold::Attempts(n) => n.to_string(),
        LockoutThreshold::Never => "Never".into(),
    };
    let rows = [
        (MIN_AGE, s.min_password_age_days.to_string()),
        (MAX_AGE, max_age),
        (MIN_LENGTH, s.min_password_length.to_string()),
        (HISTORY, history),
        (THRESHOLD, threshold),
        (DURATION, s.lockout_duration_minutes.to_string()),
        (WINDOW, s.lockout_window_minutes.to_string()),
    ];
    let mut out = String::new();
    for (label, value) in rows {
        out.push_str(&format!("{:<54}{value}\n", format!("{label}:")));
    }
    out.push_str("The command completed successfully.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Force user logoff how long after time expires?:       Never\n\
Minimum password age (days):                          0\n\
Maximum password age (days):                          Unlimited\n\
Minimum password length:                              0\n\
Length of password history maintained:                None\n\
Lockout threshold:                                    Never\n\
Lockout duration (minutes):                           30\n\
Lockout observation window (minutes):                 30\n\
Computer role:                                        WORKSTATION\n";

    #[test]
    fn parses_unhardened_sample() {
        let s = parse_net_accounts(SAMPLE).unwrap();
        assert_eq!(s.max_password_age_days, MaxPasswordAge::Unlimited);
        assert_eq!(s.password_history_length, HistoryLength::None);
        assert_eq!(s.lockout_threshold, LockoutThreshold::Never);
        assert_eq!(s.min_password_length, 0);
        assert_eq!(s.lockout_duration_minutes, 30);
    }

    #[test]
    fn each_label_is_required() {
        for label in [MIN_AGE, MAX_AGE, MIN_LENGTH, HISTORY, THRESHOLD, DURATION, WINDOW] {
            let text: String = SAMPLE
                .lines()
                .filter(|l| !l.starts_with(label))
                .map(|l| format!("{l}\n"))
                .collect();
            assert_eq!(parse_net_accounts(&text), Err(ParseError::MissingField(label)));
        }
    }

    #[test]
    fn bad_number() {
        let text = SAMPLE.replace("Minimum password length:                              0", "Minimum password length: lots");
        assert!(matches!(
            parse_net_accounts(&text),
            Err(ParseError::InvalidValue { label: MIN_LENGTH, .. })
        ));
    }

    #[test]
    fn min_age_above_max_age_is_rejected() {
        let text = SAMPLE
            .replace("Unlimited", "10")
            .replace("Minimum password age (days):                          0", "Minimum password age (days): 11");
        assert!(matches!(parse_net_accounts(&text), Err(ParseError::Inconsistent(_))));
    }

    #[test]
    fn render_roundtrip() {
        let s = parse_net_accounts(SAMPLE).unwrap();
        assert_eq!(parse_net_accounts(&render_net_accounts(&s)).unwrap(), s);
    }
}
