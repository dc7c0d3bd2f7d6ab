//! Day preparation and per-user mining.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::Result;
use crate::ingest::{sensors, DayLog, Entity};
use crate::location::{attach_location_states, estimate_location_states, LocationState, SignalType};
use crate::mining::{baseline_profile_counted, mine_profile, MiningConfig, MiningStats, Profile};
use crate::temporal::{apply_granularity, GranularityConfig};

/// Which signals feed the location estimate, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocationMode {
    /// No location estimate; entities pass through untouched.
    Off,
    WifiOnly,
    #[default]
    Fused,
}

impl LocationMode {
    fn signal(self) -> Option<SignalType> {
        match self {
            LocationMode::Off => None,
            LocationMode::WifiOnly => Some(SignalType::WifiOnly),
            LocationMode::Fused => Some(SignalType::Fused),
        }
    }
}

impl FromStr for LocationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "off" | "none" => Ok(LocationMode::Off),
            other => other.parse::<SignalType>().map(|s| match s {
                SignalType::WifiOnly => LocationMode::WifiOnly,
                SignalType::Fused => LocationMode::Fused,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiningMode {
    #[default]
    Windowed,
    Baseline,
}

/// Estimate location states, replace raw coordinates by derived
/// `LocationState` entities, and snap everything to the grid.
///
/// Raw fixes are too precise to ever repeat, so they are dropped from the
/// mining stream; each entity behind a moving or stationary event yields one
/// `LocationState` entity at its timestamp instead.
pub fn prepare_day(day: &DayLog, location: LocationMode, granularity: GranularityConfig) -> DayLog {
    let mut day = day.clone();
    if let Some(signal) = location.signal() {
        let estimate = estimate_location_states(&day.entities, signal);
        attach_location_states(&mut day, &estimate.events);
        let mut derived: BTreeSet<(chrono::NaiveDateTime, LocationState)> = BTreeSet::new();
        for event in &estimate.events {
            if event.state == LocationState::Unknown {
                continue;
            }
            derived.extend(event.entities.iter().map(|e| (e.timestamp, event.state)));
        }
        day.entities.retain(|e| e.sensor != sensors::LOCATION);
        day.entities.extend(derived.into_iter().map(|(t, state)| {
            let mut e = Entity::new(t, sensors::LOCATION_STATE, state.as_str());
            e.location_state = Some(state);
            e
        }));
        day.entities.sort_by_key(|e| e.timestamp);
    }
    apply_granularity(day, granularity)
}

pub fn prepare_days(days: &[DayLog], location: LocationMode, granularity: GranularityConfig) -> Vec<DayLog> {
    days.iter().map(|d| prepare_day(d, location, granularity)).collect()
}

/// Mine one user's already prepared days.
pub fn mine_prepared(
    user_id: &str,
    days: &[DayLog],
    config: &MiningConfig,
    mode: MiningMode,
    stats: &mut MiningStats,
) -> Result<Profile> {
    match mode {
        MiningMode::Windowed => mine_profile(user_id, days, config, stats),
        MiningMode::Baseline => baseline_profile_counted(user_id, days, config, stats),
    }
}

/// Prepare and mine one user's raw days.
pub fn mine_user(
    user_id: &str,
    days: &[DayLog],
    config: &MiningConfig,
    location: LocationMode,
    mode: MiningMode,
) -> Result<(Profile, MiningStats)> {
    let prepared = prepare_days(days, location, config.granularity);
    let mut stats = MiningStats::default();
    let profile = mine_prepared(user_id, &prepared, config, mode, &mut stats)?;
    Ok((profile, stats))
}

/// Mine every user in parallel. Results keep the map's key order.
pub fn mine_all(
    users: &BTreeMap<String, Vec<DayLog>>,
    config: &MiningConfig,
    location: LocationMode,
    mode: MiningMode,
) -> Vec<(String, Result<(Profile, MiningStats)>)> {
    let users: Vec<(&String, &Vec<DayLog>)> = users.iter().collect();
    users
        .par_iter()
        .map(|(user, days)| ((*user).clone(), mine_user(user, days, config, location, mode)))
        .collect()
}
