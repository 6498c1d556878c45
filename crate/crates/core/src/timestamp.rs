//! Day-granularity timestamps.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::PilotError;

/// Days since the Unix epoch. Ordering is calendar ordering.
///
/// The concrete form is `DD/MM/YYYY`, both in policy texts and in scenario
/// files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(u32);

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

impl Timestamp {
    pub const fn from_days(days: u32) -> Self {
        Timestamp(days)
    }

    pub fn days(self) -> u32 {
        self.0
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)?;
        let days = date.signed_duration_since(epoch()).num_days();
        u32::try_from(days).ok().map(Timestamp)
    }

    pub fn to_date(self) -> NaiveDate {
        epoch() + chrono::Days::new(u64::from(self.0))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.to_date();
        write!(f, "{:02}/{:02}/{:04}", d.day(), d.month(), d.year())
    }
}

impl FromStr for Timestamp {
    type Err = PilotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PilotError::InvalidDate(s.to_string());
        let mut parts = s.split('/');
        let (Some(d), Some(m), Some(y), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        if d.len() != 2 || m.len() != 2 || y.len() != 4 {
            return Err(bad());
        }
        if !(d.bytes().chain(m.bytes()).chain(y.bytes())).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let day: u32 = d.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        Timestamp::from_ymd(year, month, day).ok_or_else(bad)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
