use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{GranularTime, GranularityConfig, MINUTES_PER_DAY};

/// A `(sensor, data)` pair; the unit that has to recur for a motif to form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Item {
    pub sensor: String,
    pub data: String,
}

impl Item {
    pub fn new(sensor: impl Into<String>, data: impl Into<String>) -> Self {
        Self {
            sensor: sensor.into(),
            data: data.into(),
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sensor, self.data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Minimum number of co-occurring matched items in one slot.
    pub theta: u32,
    /// Minimum motif confidence, in percent.
    #[serde(rename = "lambda")]
    pub lambda_pct: f64,
    #[serde(rename = "window")]
    pub window_size: usize,
    pub granularity: GranularityConfig,
}

impl MiningConfig {
    pub fn new(theta: u32, lambda_pct: f64, window_size: usize, granularity_minutes: u32) -> Result<Self> {
        let config = Self {
            theta,
            lambda_pct,
            window_size,
            granularity: GranularityConfig::new(granularity_minutes)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta < 1 {
            return Err(Error::Config("theta must be at least 1".into()));
        }
        if self.window_size < 2 {
            return Err(Error::Config("window size must be at least 2".into()));
        }
        if !(0.0..=100.0).contains(&self.lambda_pct) {
            return Err(Error::Config(format!(
                "lambda must be within 0..=100, got {}",
                self.lambda_pct
            )));
        }
        Ok(())
    }
}

/// Items that recur at the same slot across several days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub slot: GranularTime,
    pub items: BTreeSet<Item>,
    pub confidence_pct: f64,
    pub support_days: BTreeSet<NaiveDate>,
}

impl Group {
    pub fn key(&self) -> (GranularTime, &BTreeSet<Item>) {
        (self.slot, &self.items)
    }

    /// `HH:MM-HH:MM`, the slot and the grid cell after it.
    pub fn interval(&self, granularity: GranularityConfig) -> String {
        let end = (self.slot.minute_of_day() + granularity.precision()).min(MINUTES_PER_DAY);
        format!(
            "{}-{}",
            self.slot,
            GranularTime::from_minute(end).expect("clamped to the day")
        )
    }
}

/// Groups found inside one window position.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    pub window_start_date: NaiveDate,
    pub window_days: Vec<NaiveDate>,
    pub groups: Vec<Group>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub user_id: String,
    pub config: MiningConfig,
    pub motifs: Vec<Group>,
}

impl Profile {
    pub fn empty(user_id: impl Into<String>, config: MiningConfig) -> Self {
        Self {
            user_id: user_id.into(),
            config,
            motifs: Vec::new(),
        }
    }

    pub fn motif_keys(&self) -> BTreeSet<(GranularTime, BTreeSet<Item>)> {
        self.motifs
            .iter()
            .map(|m| (m.slot, m.items.clone()))
            .collect()
    }

    /// Pretty JSON with a trailing newline; stable for identical inputs.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("profile serialization is infallible");
        text.push('\n');
        text
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "profile {} ({} motifs)", self.user_id, self.motifs.len())?;
        for m in &self.motifs {
            let items: Vec<String> = m.items.iter().map(ToString::to_string).collect();
            writeln!(
                f,
                "  {{confidence:{:.0}%; {}; {}}}",
                m.confidence_pct,
                m.interval(self.config.granularity),
                items.join("; ")
            )?;
        }
        Ok(())
    }
}

/// Deterministic operation counters for one mining run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MiningStats {
    /// Day-versus-day comparisons.
    pub day_pairs: u64,
    /// Behavior-versus-behavior comparisons while building the profile.
    pub behavior_pairs: u64,
    /// Steps taken while merging the entity lists of compared days.
    pub entity_steps: u64,
}

impl MiningStats {
    /// Comparisons of whole units (days or behaviors).
    pub fn comparisons(&self) -> u64 {
        self.day_pairs + self.behavior_pairs
    }

    pub fn add(&mut self, other: &MiningStats) {
        self.day_pairs += other.day_pairs;
        self.behavior_pairs += other.behavior_pairs;
        self.entity_steps += other.entity_steps;
    }
}
