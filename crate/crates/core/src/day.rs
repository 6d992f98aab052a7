//! Whole-day time axis.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of days since 1970-01-01. All interval arithmetic in the crate is
/// done on this integer axis with inclusive end points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DayIndex(pub i32);

const UNIX_EPOCH_CE_DAYS: i32 = 719_163;

impl DayIndex {
    pub fn from_date(date: NaiveDate) -> Self {
        DayIndex(date.num_days_from_ce() - UNIX_EPOCH_CE_DAYS)
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(Self::from_date)
    }

    pub fn to_date(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0 + UNIX_EPOCH_CE_DAYS)
            .expect("day index within chrono's supported range")
    }

    /// Parses `text` with a chrono format string. `%Y-%m-%d` takes a fast
    /// path that avoids the generic format machinery.
    pub fn parse_with_format(text: &str, format: &str) -> Option<Self> {
        if format == ISO_FORMAT {
            return parse_iso(text.as_bytes());
        }
        NaiveDate::parse_from_str(text, format)
            .ok()
            .map(Self::from_date)
    }

    pub fn offset(self, days: i32) -> Self {
        DayIndex(self.0 + days)
    }

    pub fn days_since(self, earlier: DayIndex) -> i32 {
        self.0 - earlier.0
    }
}

pub const ISO_FORMAT: &str = "%Y-%m-%d";

fn parse_iso(b: &[u8]) -> Option<DayIndex> {
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let num = |s: &[u8]| -> Option<u32> {
        s.iter().try_fold(0u32, |acc, &c| {
            c.is_ascii_digit().then(|| acc * 10 + u32::from(c - b'0'))
        })
    };
    let year = num(&b[0..4])? as i32;
    let month = num(&b[5..7])?;
    let day = num(&b[8..10])?;
    DayIndex::from_ymd(year, month, day)
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.to_date();
        write!(f, "{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
    }
}

impl FromStr for DayIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_iso(s.trim().as_bytes()).ok_or_else(|| format!("invalid date `{s}`, expected YYYY-MM-DD"))
    }
}

impl Serialize for DayIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DayIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
