//! Temporal granularity: snapping wall-clock times onto a coarse daily grid.
//!
//! The grid is anchored at midnight and steps by the configured precision.
//! A time maps to whichever neighbouring grid point is nearer; exact midpoints
//! go to the later point. The grid includes `24:00` as its final point so that
//! late-evening times stay on their own calendar day.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::DayLog;

pub const MINUTES_PER_DAY: u32 = 1440;

/// The precisions used throughout the evaluation, in minutes.
pub const STANDARD_PRECISIONS: [u32; 6] = [5, 15, 30, 60, 90, 120];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct GranularityConfig {
    precision: u32,
}

impl GranularityConfig {
    /// Precision must be positive and divide the 1440-minute day.
    pub fn new(precision_minutes: u32) -> Result<Self> {
        if precision_minutes == 0 || precision_minutes > MINUTES_PER_DAY {
            return Err(Error::Config(format!(
                "granularity must be in 1..=1440 minutes, got {precision_minutes}"
            )));
        }
        if MINUTES_PER_DAY % precision_minutes != 0 {
            return Err(Error::Config(format!(
                "granularity {precision_minutes} does not divide 1440 minutes"
            )));
        }
        Ok(Self {
            precision: precision_minutes,
        })
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }
}

impl TryFrom<u32> for GranularityConfig {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Self::new(value)
    }
}

impl From<GranularityConfig> for u32 {
    fn from(value: GranularityConfig) -> Self {
        value.precision
    }
}

/// A minute of the day on the granularity grid, `0..=1440`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GranularTime(u16);

impl GranularTime {
    pub fn from_minute(minute: u32) -> Result<Self> {
        if minute > MINUTES_PER_DAY {
            return Err(Error::Config(format!("minute {minute} outside 0..=1440")));
        }
        Ok(Self(minute as u16))
    }

    pub fn minute_of_day(&self) -> u32 {
        self.0 as u32
    }
}

impl fmt::Display for GranularTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for GranularTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid HH:MM time {s:?}"));
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        if h.len() != 2 || m.len() != 2 {
            return Err(bad());
        }
        let h: u32 = h.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        if m >= 60 {
            return Err(bad());
        }
        Self::from_minute(h * 60 + m).map_err(|_| bad())
    }
}

impl Serialize for GranularTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GranularTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Snap a minute-of-day onto the grid.
pub fn snap_minute(minute: u32, config: GranularityConfig) -> GranularTime {
    let p = config.precision;
    let minute = minute.min(MINUTES_PER_DAY - 1);
    let floor = minute / p * p;
    if floor == minute {
        return GranularTime(floor as u16);
    }
    let ceil = floor + p;
    // ceil never exceeds 1440 because p divides the day.
    let snapped = if ceil - minute <= minute - floor {
        ceil
    } else {
        floor
    };
    GranularTime(snapped as u16)
}

/// Snap a wall-clock time onto the grid. Seconds are truncated first.
pub fn snap_time(t: NaiveTime, config: GranularityConfig) -> GranularTime {
    snap_minute(t.hour() * 60 + t.minute(), config)
}

/// Set every entity's granular time. Timestamps and order are untouched.
pub fn apply_granularity(mut day: DayLog, config: GranularityConfig) -> DayLog {
    for entity in &mut day.entities {
        entity.granular_time = Some(snap_time(entity.timestamp.time(), config));
    }
    day.granularity = Some(config);
    day
}
