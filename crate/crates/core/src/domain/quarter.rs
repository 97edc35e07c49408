use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A calendar quarter stored as `year * 4 + (quarter - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter(i32);

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Self {
        assert!((1..=4).contains(&quarter), "quarter must be 1..=4, got {quarter}");
        Quarter(year * 4 + i32::from(quarter) - 1)
    }

    pub fn from_index(index: i32) -> Self {
        Quarter(index)
    }

    pub fn index(self) -> i32 {
        self.0
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(4)
    }

    pub fn quarter(self) -> u8 {
        (self.0.rem_euclid(4) + 1) as u8
    }

    /// Parses `YYYYQn` or an ISO date `YYYY-MM-DD` (mapped to the quarter containing it).
    pub fn parse(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if let Some((y, q)) = s.split_once(['Q', 'q']) {
            let year: i32 = y
                .parse()
                .map_err(|_| Error::invalid(format!("bad year in {s:?}")))?;
            let q: u8 = q
                .parse()
                .map_err(|_| Error::invalid(format!("bad quarter in {s:?}")))?;
            if !(1..=4).contains(&q) {
                return Err(Error::invalid(format!("quarter out of range in {s:?}")));
            }
            return Ok(Quarter::new(year, q));
        }
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() == 3 {
            let year: i32 = parts[0]
                .parse()
                .map_err(|_| Error::invalid(format!("bad year in {s:?}")))?;
            let month: u8 = parts[1]
                .parse()
                .map_err(|_| Error::invalid(format!("bad month in {s:?}")))?;
            let day: u8 = parts[2]
                .parse()
                .map_err(|_| Error::invalid(format!("bad day in {s:?}")))?;
            if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
                return Err(Error::invalid(format!("date out of range: {s:?}")));
            }
            return Ok(Quarter::new(year, (month - 1) / 3 + 1));
        }
        Err(Error::invalid(format!("unrecognised date {s:?}")))
    }
}

impl Add<i32> for Quarter {
    type Output = Quarter;
    fn add(self, rhs: i32) -> Quarter {
        Quarter(self.0 + rhs)
    }
}

impl Sub<i32> for Quarter {
    type Output = Quarter;
    fn sub(self, rhs: i32) -> Quarter {
        Quarter(self.0 - rhs)
    }
}

impl Sub<Quarter> for Quarter {
    type Output = i32;
    fn sub(self, rhs: Quarter) -> i32 {
        self.0 - rhs.0
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year(), self.quarter())
    }
}

impl FromStr for Quarter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Quarter::parse(s)
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Quarter::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let q = Quarter::parse("1948Q1").unwrap();
        assert_eq!(q.to_string(), "1948Q1");
        assert_eq!(Quarter::parse("2017-04-01").unwrap(), Quarter::new(2017, 2));
        assert_eq!(Quarter::parse("1967q4").unwrap() + 41, Quarter::new(1978, 1));
        assert!(Quarter::parse("2017Q5").is_err());
        assert!(Quarter::parse("garbage").is_err());
    }

    #[test]
    fn arithmetic_crosses_years() {
        let q = Quarter::new(2016, 4);
        assert_eq!(q + 2, Quarter::new(2017, 2));
        assert_eq!(Quarter::new(2016, 4) - Quarter::new(1967, 4), 196);
        assert_eq!((Quarter::new(1, 1) - 1).to_string(), "0Q4");
    }
}
