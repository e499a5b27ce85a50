use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DateOrder {
    #[default]
    DayMonthYear,
    MonthDayYear,
    YearMonthDay,
}

/// Locale layout of the dates `net user` prints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateFormatConfig {
    pub order: DateOrder,
    pub separator: char,
}

impl Default for DateFormatConfig {
    fn default() -> Self {
        Self {
            order: DateOrder::DayMonthYear,
            separator: '/',
        }
    }
}

impl DateFormatConfig {
    pub fn new(order: DateOrder, separator: char) -> Self {
        Self { order, separator }
    }

    /// Parses a date token. A trailing time part (`17/11/2024 10:15:32 AM`)
    /// is ignored; only the first whitespace-separated token is read.
    pub fn parse(&self, text: &str) -> Option<NaiveDate> {
        let token = text.split_whitespace().next()?;
        let parts: Vec<&str> = token.split(self.separator).collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit())) {
            return None;
        }
        let nums: Vec<u32> = parts.iter().map(|p| p.parse().ok()).collect::<Option<_>>()?;
        let (y, m, d) = match self.order {
            DateOrder::DayMonthYear => (nums[2], nums[1], nums[0]),
            DateOrder::MonthDayYear => (nums[2], nums[0], nums[1]),
            DateOrder::YearMonthDay => (nums[0], nums[1], nums[2]),
        };
        NaiveDate::from_ymd_opt(i32::try_from(y).ok()?, m, d)
    }

    pub fn format(&self, date: NaiveDate) -> String {
        use chrono::Datelike;
        let (y, m, d) = (date.year(), date.month(), date.day());
        let s = self.separator;
        match self.order {
            DateOrder::DayMonthYear => format!("{d:02}{s}{m:02}{s}{y:04}"),
            DateOrder::MonthDayYear => format!("{m:02}{s}{d:02}{s}{y:04}"),
            DateOrder::YearMonthDay => format!("{y:04}{s}{m:02}{s}{d:02}"),
        }
    }
}
