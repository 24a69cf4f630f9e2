//! Monday–Friday working days with optional excluded dates.

use std::collections::BTreeSet;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCalendar {
    /// Holidays and other non-working weekdays.
    #[serde(default)]
    pub excluded: BTreeSet<NaiveDate>,
}

impl WorkCalendar {
    pub fn new<I: IntoIterator<Item = NaiveDate>>(excluded: I) -> Self {
        Self {
            excluded: excluded.into_iter().collect(),
        }
    }

    pub fn is_working_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !self.excluded.contains(&d)
    }

    /// The first `n` working days on or after `from`.
    pub fn working_days_from(&self, from: NaiveDate, n: usize) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(n);
        let mut d = from;
        while out.len() < n {
            if self.is_working_day(d) {
                out.push(d);
            }
            d = d + Days::new(1);
        }
        out
    }

    /// Working days in `[start, end]`.
    pub fn working_days_between(&self, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| self.is_working_day(*d))
            .collect()
    }
}
