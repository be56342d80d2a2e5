use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A calendar quarter, labelled `YYYY-Qn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quarter {
    year: i32,
    q: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid quarter label {0:?}, expected YYYY-Qn")]
pub struct QuarterParseError(pub String);

impl Quarter {
    pub fn new(year: i32, q: u8) -> Option<Self> {
        (1..=4).contains(&q).then_some(Self { year, q })
    }

    /// The quarter containing `ts` in UTC.
    pub fn of(ts: &DateTime<Utc>) -> Self {
        Self {
            year: ts.year(),
            q: ts.month0() as u8 / 3 + 1,
        }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn q(self) -> u8 {
        self.q
    }

    pub fn previous(self) -> Self {
        match self.q {
            1 => Self { year: self.year - 1, q: 4 },
            q => Self { year: self.year, q: q - 1 },
        }
    }

    pub fn next(self) -> Self {
        match self.q {
            4 => Self { year: self.year + 1, q: 1 },
            q => Self { year: self.year, q: q + 1 },
        }
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = QuarterParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || QuarterParseError(s.to_owned());
        let (year, q) = s.trim().split_once("-Q").ok_or_else(err)?;
        if year.len() != 4 || q.len() != 1 {
            return Err(err());
        }
        let year = year.parse().map_err(|_| err())?;
        let q = q.parse().map_err(|_| err())?;
        Self::new(year, q).ok_or_else(err)
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive quarter bounds; an absent end is open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuarterRange {
    pub from: Option<Quarter>,
    pub to: Option<Quarter>,
}

impl QuarterRange {
    pub fn single(q: Quarter) -> Self {
        Self {
            from: Some(q),
            to: Some(q),
        }
    }

    pub fn contains(&self, q: Quarter) -> bool {
        self.from.map_or(true, |f| f <= q) && self.to.map_or(true, |t| q <= t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn calendar_quarters_in_utc() {
        let q = |m, d| Quarter::of(&Utc.with_ymd_and_hms(2024, m, d, 0, 0, 0).unwrap());
        assert_eq!(q(1, 1).to_string(), "2024-Q1");
        assert_eq!(q(3, 31).to_string(), "2024-Q1");
        assert_eq!(q(4, 1).to_string(), "2024-Q2");
        assert_eq!(q(12, 31).to_string(), "2024-Q4");
    }

    #[test]
    fn parse_and_order() {
        let a: Quarter = "2023-Q4".parse().unwrap();
        let b: Quarter = "2024-Q1".parse().unwrap();
        assert!(a < b);
        assert_eq!(a.next(), b);
        assert_eq!(b.previous(), a);
        for bad in ["2024-Q5", "2024-Q0", "2024Q1", "24-Q1", "2024-q1", ""] {
            assert!(bad.parse::<Quarter>().is_err(), "{bad}");
        }
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"2024-Q1\"");
    }

    #[test]
    fn range_bounds_are_inclusive() {
        let r = QuarterRange {
            from: Some("2024-Q1".parse().unwrap()),
            to: Some("2024-Q2".parse().unwrap()),
        };
        assert!(r.contains("2024-Q1".parse().unwrap()));
        assert!(r.contains("2024-Q2".parse().unwrap()));
        assert!(!r.contains("2024-Q3".parse().unwrap()));
        assert!(QuarterRange::default().contains("1999-Q1".parse().unwrap()));
    }
}
