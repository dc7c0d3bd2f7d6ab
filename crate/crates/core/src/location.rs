//! Coarse location state (moving / stationary / unknown) from whatever location
//! signals a day happens to contain.
//!
//! Two paths exist. The WiFi-only path looks at runs of consecutive BSSID
//! sightings: a run where no BSSID repeats means the user passed through
//! different networks (moving), a run with a repeat means they stayed around
//! (stationary). The fused path classifies geographic fixes first (GPS pairs
//! by speed and displacement, Cell-ID triples by the first-to-third distance)
//! and uses the WiFi rules only for the stretches geography cannot classify.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{sensors, DayLog, Entity};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationState {
    Moving,
    Stationary,
    Unknown,
}

impl LocationState {
    pub fn as_str(&self) -> &'static str {
        match self {
            LocationState::Moving => "moving",
            LocationState::Stationary => "stationary",
            LocationState::Unknown => "unknown",
        }
    }
}

impl fmt::Display for LocationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeoSource {
    Gps,
    CellId,
    Other,
}

impl GeoSource {
    fn from_provider(provider: &str) -> Self {
        match provider.trim().to_ascii_lowercase().as_str() {
            "gps" | "fused" => GeoSource::Gps,
            "network" | "cell" | "cellid" | "cell-id" | "cell_id" | "gsm" => GeoSource::CellId,
            _ => GeoSource::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
    pub timestamp: NaiveDateTime,
    pub source: GeoSource,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64, timestamp: NaiveDateTime, source: GeoSource) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Config(format!(
                "coordinates out of range: {latitude}, {longitude}"
            )));
        }
        Ok(Self {
            latitude,
            longitude,
            timestamp,
            source,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    /// Read a `Location` entity whose data is `lat,lon[,provider]`.
    pub fn from_entity(entity: &Entity) -> Result<Self> {
        let mut parts = entity.data.split(',').map(str::trim);
        let bad = || Error::Config(format!("malformed coordinates {:?}", entity.data));
        let lat: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let lon: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let source = parts.next().map(GeoSource::from_provider).unwrap_or(GeoSource::Other);
        if !lat.is_finite() || !lon.is_finite() {
            return Err(bad());
        }
        Self::new(lat, lon, entity.timestamp, source)
    }
}

/// Great-circle distance in metres on a sphere of radius 6,371 km.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationEvent {
    pub state: LocationState,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub entities: Vec<Entity>,
}

impl LocationEvent {
    pub fn contains(&self, t: NaiveDateTime) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalType {
    WifiOnly,
    Fused,
}

impl FromStr for SignalType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wifi" | "wifi_only" | "wifi-only" => Ok(SignalType::WifiOnly),
            "fused" => Ok(SignalType::Fused),
            other => Err(format!("unknown signal type {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocationConfig {
    /// Sightings further apart than this start a new sequence.
    pub gap: Duration,
    pub gps_min_speed_mps: f64,
    pub gps_min_displacement_m: f64,
    pub cell_moving_distance_m: f64,
}

impl Default for LocationConfig {
    fn default() -> Self {
        Self {
            // twice the 6-minute WiFi scan period
            gap: Duration::minutes(12),
            gps_min_speed_mps: 1.0,
            gps_min_displacement_m: 50.0,
            cell_moving_distance_m: 800.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocationEstimate {
    pub events: Vec<LocationEvent>,
    /// Location entities dropped for malformed coordinates.
    pub skipped: usize,
    pub distance_computations: usize,
}

pub fn estimate_location_states(entities: &[Entity], signal: SignalType) -> LocationEstimate {
    estimate_location_states_with(entities, signal, &LocationConfig::default())
}

pub fn estimate_location_states_with(
    entities: &[Entity],
    signal: SignalType,
    config: &LocationConfig,
) -> LocationEstimate {
    let Some(first) = entities.first() else {
        return LocationEstimate::default();
    };
    let date = first.timestamp.date();

    let mut wifi: Vec<&Entity> = entities.iter().filter(|e| e.sensor == sensors::WIFI).collect();
    wifi.sort_by(|a, b| (a.timestamp, &a.data).cmp(&(b.timestamp, &b.data)));

    let mut estimate = LocationEstimate::default();
    let mut events = match signal {
        SignalType::WifiOnly => wifi_events(&wifi, &[], config),
        SignalType::Fused => {
            let geo_events = geo_events(entities, config, &mut estimate);
            let uncovered: Vec<&Entity> = wifi
                .into_iter()
                .filter(|w| !geo_events.iter().any(|g| g.contains(w.timestamp)))
                .collect();
            let mut all = wifi_events(&uncovered, &geo_events, config);
            all.extend(geo_events);
            all.sort_by_key(|e| (e.start, e.end));
            all
        }
    };

    if events.is_empty() {
        events.push(LocationEvent {
            state: LocationState::Unknown,
            start: date.and_time(NaiveTime::MIN),
            end: date.and_hms_opt(23, 59, 59).unwrap(),
            entities: Vec::new(),
        });
    } else {
        events = fill_unknown_gaps(events, config.gap);
    }
    estimate.events = events;
    estimate
}

fn classify_wifi_sequence(seq: &[&Entity]) -> LocationState {
    if seq.len() < 2 {
        return LocationState::Unknown;
    }
    let mut seen = std::collections::HashSet::with_capacity(seq.len());
    if seq.iter().all(|e| seen.insert(e.data.as_str())) {
        LocationState::Moving
    } else {
        LocationState::Stationary
    }
}

/// WiFi sequences split on gaps and on any geographic event lying between two
/// sightings.
fn wifi_events(wifi: &[&Entity], barriers: &[LocationEvent], config: &LocationConfig) -> Vec<LocationEvent> {
    let mut events = Vec::new();
    let mut start = 0;
    for i in 1..=wifi.len() {
        let boundary = i == wifi.len() || {
            let (prev, next) = (wifi[i - 1].timestamp, wifi[i].timestamp);
            next - prev > config.gap || barriers.iter().any(|b| prev < b.start && b.start <= next)
        };
        if boundary {
            let seq = &wifi[start..i];
            events.push(LocationEvent {
                state: classify_wifi_sequence(seq),
                start: seq[0].timestamp,
                end: seq[seq.len() - 1].timestamp,
                entities: seq.iter().map(|e| (*e).clone()).collect(),
            });
            start = i;
        }
    }
    events
}

fn source_class(source: GeoSource) -> u8 {
    match source {
        GeoSource::Gps => 0,
        GeoSource::CellId => 1,
        GeoSource::Other => 2,
    }
}

fn geo_events(entities: &[Entity], config: &LocationConfig, estimate: &mut LocationEstimate) -> Vec<LocationEvent> {
    let mut points: Vec<(GeoPoint, &Entity)> = Vec::new();
    for entity in entities.iter().filter(|e| e.sensor == sensors::LOCATION) {
        match GeoPoint::from_entity(entity) {
            Ok(point) => points.push((point, entity)),
            Err(_) => estimate.skipped += 1,
        }
    }
    points.sort_by(|a, b| (a.0.timestamp, &a.1.data).cmp(&(b.0.timestamp, &b.1.data)));

    let mut events = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        let boundary = i == points.len() || {
            let (prev, next) = (&points[i - 1].0, &points[i].0);
            next.timestamp - prev.timestamp > config.gap
                || source_class(prev.source) != source_class(next.source)
        };
        if boundary {
            classify_geo_run(&points[start..i], config, estimate, &mut events);
            start = i;
        }
    }
    events
}

/// Classify one run of same-source fixes and append its events. Runs too short
/// for their rule produce nothing.
fn classify_geo_run(
    run: &[(GeoPoint, &Entity)],
    config: &LocationConfig,
    estimate: &mut LocationEstimate,
    events: &mut Vec<LocationEvent>,
) {
    let span = match run[0].0.source {
        GeoSource::Gps => 2,
        GeoSource::CellId | GeoSource::Other => 3,
    };
    if run.len() < span {
        return;
    }
    let mut states = vec![LocationState::Unknown; run.len()];
    for i in (span - 1)..run.len() {
        let (a, b) = (&run[i + 1 - span].0, &run[i].0);
        let distance = haversine_distance(a, b);
        estimate.distance_computations += 1;
        let moving = if span == 2 {
            let seconds = (b.timestamp - a.timestamp).num_milliseconds() as f64 / 1000.0;
            let speed = if seconds > 0.0 { distance / seconds } else { 0.0 };
            speed > config.gps_min_speed_mps && distance > config.gps_min_displacement_m
        } else {
            distance > config.cell_moving_distance_m
        };
        states[i] = if moving {
            LocationState::Moving
        } else {
            LocationState::Stationary
        };
    }
    // leading fixes take the state of the first classified window
    for i in 0..span - 1 {
        states[i] = states[span - 1];
    }

    let mut begin = 0;
    for i in 1..=run.len() {
        if i == run.len() || states[i] != states[begin] {
            events.push(LocationEvent {
                state: states[begin],
                start: run[begin].0.timestamp,
                end: run[i - 1].0.timestamp,
                entities: run[begin..i].iter().map(|(_, e)| (*e).clone()).collect(),
            });
            begin = i;
        }
    }
}

fn fill_unknown_gaps(events: Vec<LocationEvent>, gap: Duration) -> Vec<LocationEvent> {
    let mut out: Vec<LocationEvent> = Vec::with_capacity(events.len() * 2);
    for event in events {
        if let Some(prev) = out.last() {
            if event.start - prev.end > gap {
                let unknown = LocationEvent {
                    state: LocationState::Unknown,
                    start: prev.end,
                    end: event.start,
                    entities: Vec::new(),
                };
                out.push(unknown);
            }
        }
        out.push(event);
    }
    out
}

/// Set `location_state` on every entity covered by an event. Where events
/// touch, a known state wins over unknown.
pub fn attach_location_states(day: &mut DayLog, events: &[LocationEvent]) {
    for entity in &mut day.entities {
        let mut found = None;
        for event in events.iter().filter(|e| e.contains(entity.timestamp)) {
            if found.is_none() || found == Some(LocationState::Unknown) {
                found = Some(event.state);
            }
        }
        entity.location_state = found;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2014, 1, 6).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    fn wifi(h: u32, m: u32, bssid: &str) -> Entity {
        Entity::new(t(h, m), sensors::WIFI, bssid)
    }

    fn loc(h: u32, m: u32, lat: f64, lon: f64, provider: &str) -> Entity {
        Entity::new(t(h, m), sensors::LOCATION, format!("{lat},{lon},{provider}"))
    }

    fn point(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon, t(0, 0), GeoSource::Gps).unwrap()
    }

    fn states(estimate: &LocationEstimate) -> Vec<LocationState> {
        estimate.events.iter().map(|e| e.state).collect()
    }

    #[test]
    fn haversine_reference_values() {
        assert_eq!(haversine_distance(&point(10.0, 20.0), &point(10.0, 20.0)), 0.0);
        // R * pi / 180 along the equator
        let one_degree = haversine_distance(&point(0.0, 0.0), &point(0.0, 1.0));
        assert!((one_degree - 111_194.93).abs() < 5.0, "{one_degree}");
        let antipode = haversine_distance(&point(0.0, 0.0), &point(0.0, 180.0));
        assert!((antipode - 20_015_086.8).abs() < 10.0, "{antipode}");
    }

    #[test]
    fn rejects_out_of_range_points() {
        assert!(GeoPoint::new(91.0, 0.0, t(0, 0), GeoSource::Gps).is_err());
        assert!(GeoPoint::new(0.0, -180.5, t(0, 0), GeoSource::Gps).is_err());
    }

    #[test]
    fn repeated_bssid_is_stationary() {
        let day: Vec<Entity> = ["w1", "w2", "w3", "w4", "w1", "w3"]
            .iter()
            .enumerate()
            .map(|(i, b)| wifi(9, 6 * i as u32, b))
            .collect();
        let est = estimate_location_states(&day, SignalType::WifiOnly);
        assert_eq!(states(&est), vec![LocationState::Stationary]);
        assert_eq!(est.events[0].entities.len(), 6);
    }

    #[test]
    fn distinct_bssids_are_moving() {
        let day: Vec<Entity> = ["w1", "w2", "w3", "w4"]
            .iter()
            .enumerate()
            .map(|(i, b)| wifi(9, 6 * i as u32, b))
            .collect();
        let est = estimate_location_states(&day, SignalType::WifiOnly);
        assert_eq!(states(&est), vec![LocationState::Moving]);
    }

    #[test]
    fn gap_splits_sequences_and_materializes_unknown() {
        let day = vec![
            wifi(8, 0, "a"),
            wifi(8, 6, "a"),
            wifi(10, 0, "b"),
            wifi(10, 6, "c"),
            wifi(10, 20, "d"),
        ];
        let est = estimate_location_states(&day, SignalType::WifiOnly);
        assert_eq!(
            states(&est),
            vec![
                LocationState::Stationary,
                LocationState::Unknown,
                LocationState::Moving,
                LocationState::Unknown,
                LocationState::Unknown,
            ]
        );
        // the last sighting is 14 minutes after the previous one: a singleton
        assert_eq!(est.events[4].entities.len(), 1);
    }

    #[test]
    fn no_signal_day_is_one_unknown_event() {
        let day = vec![Entity::new(t(12, 0), sensors::CALL, "123|in")];
        let est = estimate_location_states(&day, SignalType::Fused);
        assert_eq!(states(&est), vec![LocationState::Unknown]);
        assert_eq!(est.events[0].start, t(0, 0));
        assert_eq!(est.events[0].end.date(), t(0, 0).date());
        assert!(estimate_location_states(&[], SignalType::Fused).events.is_empty());
    }

    #[test]
    fn cell_triple_beyond_800m_is_moving() {
        // 900 m due north: 900 / (R * pi / 180) degrees of latitude
        let step = 900.0 / (EARTH_RADIUS_M * std::f64::consts::PI / 180.0);
        let day = vec![
            loc(9, 0, 0.0, 0.0, "network"),
            loc(9, 2, step / 2.0, 0.0, "network"),
            loc(9, 4, step, 0.0, "network"),
        ];
        let est = estimate_location_states(&day, SignalType::Fused);
        assert_eq!(states(&est), vec![LocationState::Moving]);
        assert_eq!(est.distance_computations, 1);
    }

    #[test]
    fn cell_triple_within_800m_is_stationary() {
        let step = 700.0 / (EARTH_RADIUS_M * std::f64::consts::PI / 180.0);
        let day = vec![
            loc(9, 0, 0.0, 0.0, "cellid"),
            loc(9, 2, step, 0.0, "cellid"),
            loc(9, 4, 0.0, 0.0, "cellid"),
            loc(9, 6, step, 0.0, "cellid"),
        ];
        let est = estimate_location_states(&day, SignalType::Fused);
        assert_eq!(states(&est), vec![LocationState::Stationary]);
    }

    #[test]
    fn gps_pairs_use_speed_and_displacement() {
        // 0.01 degree of latitude is ~1.1 km; in 2 minutes that is ~9 m/s
        let day = vec![
            loc(9, 0, 0.0, 0.0, "gps"),
            loc(9, 2, 0.01, 0.0, "gps"),
            loc(9, 4, 0.02, 0.0, "gps"),
            loc(9, 6, 0.02, 0.0001, "gps"),
            loc(9, 8, 0.02, 0.0, "gps"),
        ];
        let est = estimate_location_states(&day, SignalType::Fused);
        assert_eq!(states(&est), vec![LocationState::Moving, LocationState::Stationary]);
        assert_eq!(est.distance_computations, 4);
    }

    #[test]
    fn wifi_fills_in_where_geography_cannot() {
        let day = vec![
            wifi(7, 0, "home"),
            wifi(7, 6, "home"),
            loc(9, 0, 0.0, 0.0, "gps"), // lone fix, not classifiable
            loc(12, 0, 0.0, 0.0, "cellid"),
            loc(12, 1, 0.0, 0.0, "cellid"),
            loc(12, 2, 0.0, 0.0, "cellid"),
        ];
        let est = estimate_location_states(&day, SignalType::Fused);
        assert_eq!(
            states(&est),
            vec![LocationState::Stationary, LocationState::Unknown, LocationState::Stationary]
        );
        assert_eq!(est.events[2].entities[0].sensor, sensors::LOCATION);
    }

    #[test]
    fn malformed_coordinates_are_skipped() {
        let day = vec![
            Entity::new(t(9, 0), sensors::LOCATION, "north,south"),
            loc(9, 1, 95.0, 0.0, "gps"),
            wifi(9, 2, "a"),
            wifi(9, 3, "a"),
        ];
        let est = estimate_location_states(&day, SignalType::Fused);
        assert_eq!(est.skipped, 2);
        assert_eq!(states(&est), vec![LocationState::Stationary]);
    }

    #[test]
    fn attach_marks_covered_entities() {
        let mut day = DayLog::new(
            "u",
            t(0, 0).date(),
            vec![wifi(8, 0, "a"), wifi(8, 6, "a"), Entity::new(t(8, 3), sensors::CALL, "1")],
        );
        let est = estimate_location_states(&day.entities, SignalType::WifiOnly);
        attach_location_states(&mut day, &est.events);
        assert!(day
            .entities
            .iter()
            .all(|e| e.location_state == Some(LocationState::Stationary)));
    }
}
