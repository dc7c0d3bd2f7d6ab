//! Parsing heterogeneous sensor log lines into canonical entities, and bucketing
//! them into per-user calendar days.
//!
//! Two input schemas are understood:
//!
//! * `ubiqlog`: one JSON object per line whose single key is the sensor name,
//!   e.g. `{"WiFi": {"BSSID": "...", "time": "Jan 1, 2014 2:09:42 PM"}}`.
//! * `generic`: the canonical schema this crate also writes,
//!   `{"sensor": ..., "timestamp": "ISO-8601", "data": ...}` with optional
//!   `granular_time` and `location_state`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, NaiveDateTime, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::location::LocationState;
use crate::temporal::{GranularTime, GranularityConfig};

pub const UBIQLOG_TIME_FORMAT: &str = "%b %d, %Y %I:%M:%S %p";
const CANONICAL_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.f";

pub mod sensors {
    pub const WIFI: &str = "WiFi";
    pub const BLUETOOTH: &str = "Bluetooth";
    pub const SMS: &str = "SMS";
    pub const CALL: &str = "Call";
    pub const APPLICATION: &str = "Application";
    pub const ACTIVITY: &str = "Activity";
    pub const LOCATION: &str = "Location";
    /// Derived from location-state estimation, never read from input.
    pub const LOCATION_STATE: &str = "LocationState";
}

pub const ACTIVITY_LABELS: [&str; 6] = [
    "tilting",
    "in-vehicle",
    "on-bicycle",
    "walking",
    "still",
    "unknown",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Ubiqlog,
    Generic,
    /// Per line: canonical if the object has a `sensor` key, UbiqLog otherwise.
    #[default]
    Auto,
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ubiqlog" => Ok(SourceFormat::Ubiqlog),
            "generic" => Ok(SourceFormat::Generic),
            "auto" => Ok(SourceFormat::Auto),
            other => Err(format!("unknown source format {other:?}")),
        }
    }
}

/// A record as found in the source, before any sensor-specific interpretation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub sensor_name: String,
    pub attributes: BTreeMap<String, String>,
    pub timestamp_text: String,
}

impl RawRecord {
    fn attr(&self, names: &[&str]) -> Option<&str> {
        names.iter().find_map(|name| {
            self.attributes
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, v)| v.as_str())
                .filter(|v| !v.trim().is_empty())
        })
    }
}

/// One timestamped observation: time, sensor, and a canonical identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    #[serde(with = "canonical_time")]
    pub timestamp: NaiveDateTime,
    pub sensor: String,
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granular_time: Option<GranularTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_state: Option<LocationState>,
}

impl Entity {
    pub fn new(timestamp: NaiveDateTime, sensor: impl Into<String>, data: impl Into<String>) -> Self {
        Self {
            timestamp,
            sensor: sensor.into(),
            data: data.into(),
            granular_time: None,
            location_state: None,
        }
    }

    /// One canonical JSON line (no trailing newline).
    pub fn to_canonical_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            sensor: &'a str,
            #[serde(with = "canonical_time")]
            timestamp: NaiveDateTime,
            data: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            granular_time: Option<GranularTime>,
            #[serde(skip_serializing_if = "Option::is_none")]
            location_state: Option<LocationState>,
        }
        serde_json::to_string(&Line {
            sensor: &self.sensor,
            timestamp: self.timestamp,
            data: &self.data,
            granular_time: self.granular_time,
            location_state: self.location_state,
        })
        .expect("entity serialization is infallible")
    }
}

mod canonical_time {
    use chrono::NaiveDateTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&t.format(super::CANONICAL_TIME_FORMAT))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&text, super::CANONICAL_TIME_FORMAT)
            .map_err(serde::de::Error::custom)
    }
}

/// All of one user's entities on one calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayLog {
    pub user_id: String,
    pub date: NaiveDate,
    pub entities: Vec<Entity>,
    pub is_weekend: bool,
    /// Set once `apply_granularity` has snapped every entity.
    pub granularity: Option<GranularityConfig>,
}

impl DayLog {
    pub fn new(user_id: impl Into<String>, date: NaiveDate, mut entities: Vec<Entity>) -> Self {
        entities.sort_by_key(|e| e.timestamp);
        Self {
            user_id: user_id.into(),
            date,
            entities,
            is_weekend: false,
            granularity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Empty,
    Corrupt,
    MalformedJson,
    UnknownSensor,
    MissingField,
    BadTimestamp,
    /// Sensor is on the hardware deny-list.
    Filtered,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Empty => "empty",
            RejectReason::Corrupt => "corrupt",
            RejectReason::MalformedJson => "malformed_json",
            RejectReason::UnknownSensor => "unknown_sensor",
            RejectReason::MissingField => "missing_field",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::Filtered => "filtered",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub reason: RejectReason,
    pub detail: String,
}

impl Rejection {
    fn new(reason: RejectReason, detail: impl Into<String>) -> Self {
        Self {
            reason,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub format: SourceFormat,
    /// Offset of the dataset's wall clock. Zone-qualified timestamps are
    /// converted into it; naive ones are taken as already local.
    pub offset: FixedOffset,
    /// Sensors dropped from `generic` input (matched case-insensitively).
    pub deny_list: BTreeSet<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            format: SourceFormat::Auto,
            offset: FixedOffset::east_opt(0).unwrap(),
            deny_list: default_deny_list(),
        }
    }
}

pub fn default_deny_list() -> BTreeSet<String> {
    [
        "battery",
        "network_usage",
        "networkusage",
        "system_process",
        "systemprocess",
        "cpu",
        "memory",
        "storage",
        "screen_brightness",
        "hardware",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

fn is_corrupt(text: &str) -> bool {
    text.chars()
        .any(|c| c == '\u{FFFD}' || (c.is_control() && c != '\t'))
}

/// Decode raw bytes then parse. Non-UTF-8 input is rejected as corrupt.
pub fn parse_line_bytes(line: &[u8], options: &ParseOptions) -> std::result::Result<Entity, Rejection> {
    match std::str::from_utf8(line) {
        Ok(text) => parse_record(text, options),
        Err(e) => Err(Rejection::new(RejectReason::Corrupt, e.to_string())),
    }
}

/// Parse one line into an entity, or say why it cannot be used.
pub fn parse_record(line: &str, options: &ParseOptions) -> std::result::Result<Entity, Rejection> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Err(Rejection::new(RejectReason::Empty, ""));
    }
    if is_corrupt(line) {
        return Err(Rejection::new(RejectReason::Corrupt, "undecodable characters"));
    }
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Rejection::new(RejectReason::MalformedJson, e.to_string()))?;
    let Value::Object(object) = &value else {
        return Err(Rejection::new(RejectReason::MalformedJson, "not a JSON object"));
    };
    let generic = match options.format {
        SourceFormat::Generic => true,
        SourceFormat::Ubiqlog => false,
        SourceFormat::Auto => object.contains_key("sensor"),
    };
    if generic {
        parse_generic(&value, options)
    } else {
        let raw = raw_from_ubiqlog(&value)?;
        entity_from_ubiqlog(&raw)
    }
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Split a UbiqLog line into sensor name, flat attributes and time text.
pub fn raw_from_ubiqlog(value: &Value) -> std::result::Result<RawRecord, Rejection> {
    let Value::Object(outer) = value else {
        return Err(Rejection::new(RejectReason::MalformedJson, "not a JSON object"));
    };
    if outer.len() != 1 {
        return Err(Rejection::new(
            RejectReason::MalformedJson,
            "expected exactly one sensor key",
        ));
    }
    let (sensor_name, body) = outer.iter().next().unwrap();
    if sensor_name.trim().is_empty() {
        return Err(Rejection::new(RejectReason::UnknownSensor, "empty sensor name"));
    }
    let Value::Object(fields) = body else {
        return Err(Rejection::new(RejectReason::MalformedJson, "sensor body is not an object"));
    };
    let mut attributes = BTreeMap::new();
    let mut timestamp_text = None;
    for (k, v) in fields {
        let Some(text) = value_text(v) else { continue };
        if is_corrupt(&text) {
            return Err(Rejection::new(RejectReason::Corrupt, format!("field {k}")));
        }
        if k.eq_ignore_ascii_case("time") || k.eq_ignore_ascii_case("timestamp") {
            timestamp_text = Some(text);
        } else {
            attributes.insert(k.clone(), text);
        }
    }
    let timestamp_text = timestamp_text
        .ok_or_else(|| Rejection::new(RejectReason::MissingField, "time"))?;
    Ok(RawRecord {
        sensor_name: sensor_name.clone(),
        attributes,
        timestamp_text,
    })
}

fn canonical_sensor(name: &str) -> Option<&'static str> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    Some(match key.as_str() {
        "wifi" => sensors::WIFI,
        "bluetooth" | "bluetoothproximity" => sensors::BLUETOOTH,
        "sms" => sensors::SMS,
        "call" => sensors::CALL,
        "application" | "applicationusage" | "app" => sensors::APPLICATION,
        "activity" | "activitystate" => sensors::ACTIVITY,
        "location" => sensors::LOCATION,
        _ => return None,
    })
}

/// Map an activity-recognition label onto the fixed vocabulary.
pub fn normalize_activity(label: &str) -> &'static str {
    let key: String = label
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "tilting" => "tilting",
        "invehicle" | "inavehicle" | "vehicle" => "in-vehicle",
        "onbicycle" | "bicycle" => "on-bicycle",
        "walking" | "onfoot" | "running" => "walking",
        "still" => "still",
        _ => "unknown",
    }
}

/// Turn a UbiqLog record into an entity with the sensor's canonical identifier.
pub fn entity_from_ubiqlog(raw: &RawRecord) -> std::result::Result<Entity, Rejection> {
    let sensor = canonical_sensor(&raw.sensor_name)
        .ok_or_else(|| Rejection::new(RejectReason::UnknownSensor, raw.sensor_name.clone()))?;
    let missing = |field: &str| Rejection::new(RejectReason::MissingField, field.to_string());
    let data = match sensor {
        sensors::WIFI => raw.attr(&["BSSID"]).ok_or_else(|| missing("BSSID"))?.to_string(),
        sensors::BLUETOOTH => raw
            .attr(&["BSSID", "Address", "MAC"])
            .ok_or_else(|| missing("BSSID"))?
            .to_string(),
        sensors::SMS | sensors::CALL => {
            let number = raw
                .attr(&["Address", "Number", "PhoneNumber"])
                .ok_or_else(|| missing("Address"))?;
            match raw.attr(&["Type"]) {
                Some(kind) => format!("{number}|{kind}"),
                None => number.to_string(),
            }
        }
        sensors::APPLICATION => raw
            .attr(&["ProcessName", "Process"])
            .ok_or_else(|| missing("ProcessName"))?
            .to_string(),
        sensors::ACTIVITY => {
            let label = raw
                .attr(&["Activity", "State", "Type", "Name"])
                .ok_or_else(|| missing("Activity"))?;
            normalize_activity(label).to_string()
        }
        sensors::LOCATION => {
            let lat = raw.attr(&["Latitude", "Lat"]).ok_or_else(|| missing("Latitude"))?;
            let lon = raw
                .attr(&["Longitude", "Lon", "Lng"])
                .ok_or_else(|| missing("Longitude"))?;
            let provider = raw.attr(&["Provider", "Source"]).unwrap_or("other");
            format!("{},{},{}", lat.trim(), lon.trim(), provider.trim().to_ascii_lowercase())
        }
        _ => unreachable!(),
    };
    let timestamp = NaiveDateTime::parse_from_str(raw.timestamp_text.trim(), UBIQLOG_TIME_FORMAT)
        .map_err(|e| Rejection::new(RejectReason::BadTimestamp, format!("{}: {e}", raw.timestamp_text)))?;
    Ok(Entity::new(timestamp, sensor, data))
}

/// Parse an ISO-8601 timestamp into the dataset's local wall clock.
pub fn parse_iso_timestamp(text: &str, offset: FixedOffset) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Ok(zoned) = DateTime::parse_from_rfc3339(text) {
        return Some(zoned.with_timezone(&offset).naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
}

fn parse_generic(value: &Value, options: &ParseOptions) -> std::result::Result<Entity, Rejection> {
    let field = |name: &str| value.get(name).and_then(value_text);
    let sensor = field("sensor")
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| Rejection::new(RejectReason::MissingField, "sensor"))?;
    if options
        .deny_list
        .iter()
        .any(|d| d.eq_ignore_ascii_case(sensor.trim()))
    {
        return Err(Rejection::new(RejectReason::Filtered, sensor));
    }
    let data = field("data")
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Rejection::new(RejectReason::MissingField, "data"))?;
    let ts_text = field("timestamp").ok_or_else(|| Rejection::new(RejectReason::MissingField, "timestamp"))?;
    if is_corrupt(&sensor) || is_corrupt(&data) {
        return Err(Rejection::new(RejectReason::Corrupt, "undecodable characters"));
    }
    let timestamp = parse_iso_timestamp(&ts_text, options.offset)
        .ok_or_else(|| Rejection::new(RejectReason::BadTimestamp, ts_text.clone()))?;
    let mut entity = Entity::new(timestamp, sensor, data);
    if let Some(text) = value.get("granular_time").and_then(Value::as_str) {
        entity.granular_time = Some(
            text.parse()
                .map_err(|_| Rejection::new(RejectReason::MalformedJson, format!("granular_time {text}")))?,
        );
    }
    if let Some(state) = value.get("location_state") {
        entity.location_state = Some(
            serde_json::from_value(state.clone())
                .map_err(|e| Rejection::new(RejectReason::MalformedJson, e.to_string()))?,
        );
    }
    Ok(entity)
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub parse: ParseOptions,
    pub exclude_weekend: bool,
    pub weekend_days: HashSet<Weekday>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            parse: ParseOptions::default(),
            exclude_weekend: false,
            weekend_days: HashSet::from([Weekday::Fri]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectionRecord {
    pub user_id: String,
    pub line_no: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Default)]
pub struct Dataset {
    pub users: BTreeMap<String, Vec<DayLog>>,
    pub rejections: Vec<RejectionRecord>,
    /// Lines read per user, accepted or not.
    pub lines: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn rejection_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts: BTreeMap<&str, usize> = self.users.keys().map(|u| (u.as_str(), 0)).collect();
        for r in &self.rejections {
            *counts.entry(r.user_id.as_str()).or_default() += 1;
        }
        counts
    }

    /// CSV `user_id,line_no,reason`.
    pub fn write_rejections<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["user_id", "line_no", "reason"])?;
        for r in &self.rejections {
            writer.write_record([r.user_id.as_str(), &r.line_no.to_string(), r.reason.as_str()])?;
        }
        writer.flush().map_err(|e| Error::io("<rejections>", e))?;
        Ok(())
    }
}

fn is_hidden(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    entries.retain(|p| !is_hidden(p));
    entries.sort();
    Ok(entries)
}

fn user_sources(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let mut users = Vec::new();
    for path in sorted_entries(dir)? {
        if path.is_dir() {
            let files = sorted_entries(&path)?
                .into_iter()
                .filter(|p| p.is_file())
                .collect();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            users.push((name, files));
        } else if path.is_file() {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            users.push((name, vec![path]));
        }
    }
    Ok(users)
}

struct UserLoad {
    days: Vec<DayLog>,
    rejections: Vec<RejectionRecord>,
    lines: usize,
}

fn load_user(user_id: &str, files: &[PathBuf], options: &LoadOptions) -> Result<UserLoad> {
    let mut by_date: BTreeMap<NaiveDate, Vec<Entity>> = BTreeMap::new();
    let mut rejections = Vec::new();
    let mut line_no = 0;
    for file in files {
        let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
        if bytes.is_empty() {
            continue;
        }
        let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
        for line in body.split(|&b| b == b'\n') {
            line_no += 1;
            match parse_line_bytes(line, &options.parse) {
                Ok(entity) => by_date.entry(entity.timestamp.date()).or_default().push(entity),
                Err(rejection) => rejections.push(RejectionRecord {
                    user_id: user_id.to_string(),
                    line_no,
                    reason: rejection.reason,
                }),
            }
        }
    }
    let days = by_date
        .into_iter()
        .filter_map(|(date, entities)| {
            let is_weekend = options.weekend_days.contains(&date.weekday());
            if options.exclude_weekend && is_weekend {
                return None;
            }
            let mut day = DayLog::new(user_id, date, entities);
            day.is_weekend = is_weekend;
            Some(day)
        })
        .collect();
    Ok(UserLoad {
        days,
        rejections,
        lines: line_no,
    })
}

/// Load every user under `dir`: one JSON-lines file per user (user id = file
/// stem) or one subdirectory per user whose files are read in name order.
pub fn load_dataset(dir: &Path, options: &LoadOptions) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let sources = user_sources(dir)?;
    let loaded = sources
        .par_iter()
        .map(|(user, files)| load_user(user, files, options).map(|l| (user.clone(), l)))
        .collect::<Result<Vec<_>>>()?;
    let mut dataset = Dataset::default();
    for (user, load) in loaded {
        dataset.rejections.extend(load.rejections);
        dataset.lines.insert(user.clone(), load.lines);
        dataset.users.insert(user, load.days);
    }
    Ok(dataset)
}

/// Canonical JSON-lines for a sequence of days.
pub fn to_canonical_jsonl<'a>(days: impl IntoIterator<Item = &'a DayLog>) -> String {
    let mut out = String::new();
    for day in days {
        for entity in &day.entities {
            out.push_str(&entity.to_canonical_line());
            out.push('\n');
        }
    }
    out
}

/// Parse a comma-separated weekday list such as `fri,sat`.
pub fn parse_weekdays(text: &str) -> std::result::Result<HashSet<Weekday>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Weekday>().map_err(|_| format!("unknown weekday {s:?}")))
        .collect()
}
