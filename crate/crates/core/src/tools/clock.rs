use chrono::{Local, NaiveDate};

/// Source of "today". A fixed date makes audits reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Clock {
    fixed: Option<NaiveDate>,
}

impl Clock {
    pub fn system() -> Self {
        Self { fixed: None }
    }

    pub fn fixed(date: NaiveDate) -> Self {
        Self { fixed: Some(date) }
    }

    pub fn is_fixed(&self) -> bool {
        self.fixed.is_some()
    }

    pub fn today(&self) -> NaiveDate {
        self.fixed.unwrap_or_else(|| Local::now().date_naive())
    }
}

/// ISO-8601 date string for the override, or the host's local date.
pub fn clock_now(fixed_override: Option<NaiveDate>) -> String {
    Clock { fixed: fixed_override }.today().format("%Y-%m-%d").to_string()
}
