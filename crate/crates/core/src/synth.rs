//! Synthetic lifelogs with planted motifs, jitter, dropout and noise.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{sensors, to_canonical_jsonl, DayLog, Entity};
use crate::mining::{Item, Profile};
use crate::temporal::MINUTES_PER_DAY;

/// Noise sensor mix, proportional to record counts in a real two-month
/// collection (location and activity left out).
const NOISE_MIX: [(&str, u32); 5] = [
    (sensors::WIFI, 7_640_189),
    (sensors::APPLICATION, 753_702),
    (sensors::BLUETOOTH, 117_236),
    (sensors::CALL, 97_654),
    (sensors::SMS, 28_486),
];

const RECURRENT_POOL: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedMotif {
    pub slot_minute: u32,
    pub items: Vec<Item>,
    pub repeat_probability: f64,
    #[serde(default)]
    pub jitter_minutes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_users: usize,
    pub num_days: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    pub planted_motifs: Vec<PlantedMotif>,
    #[serde(default)]
    pub noise_entities_per_day: usize,
    #[serde(default)]
    pub dropout_probability: f64,
    pub seed: u64,
    /// Draw noise identifiers from a small shared pool so they can collide.
    #[serde(default)]
    pub recurrent_noise: bool,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 1, 6).unwrap()
}

fn item(sensor: &str, data: &str) -> Item {
    Item::new(sensor, data)
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_users == 0 {
            return bad("num_users must be at least 1".into());
        }
        if self.num_days < 2 {
            return bad(format!("num_days must be at least 2, got {}", self.num_days));
        }
        if !(0.0..=1.0).contains(&self.dropout_probability) {
            return bad(format!("dropout_probability {} outside [0, 1]", self.dropout_probability));
        }
        for (i, m) in self.planted_motifs.iter().enumerate() {
            if !(0.0..=1.0).contains(&m.repeat_probability) {
                return bad(format!("motif {i}: repeat_probability outside [0, 1]"));
            }
            if m.slot_minute >= MINUTES_PER_DAY {
                return bad(format!("motif {i}: slot_minute {} past the day", m.slot_minute));
            }
            if m.items.is_empty() {
                return bad(format!("motif {i}: no items"));
            }
            if m.jitter_minutes >= MINUTES_PER_DAY / 2 {
                return bad(format!("motif {i}: jitter of {} minutes", m.jitter_minutes));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Small daily routine: six motifs of one to three items, 10' jitter,
    /// light dropout, recurrent noise.
    pub fn routine(seed: u64) -> Self {
        let motif = |hour: u32, items: Vec<Item>, p: f64| PlantedMotif {
            slot_minute: hour * 60,
            items,
            repeat_probability: p,
            jitter_minutes: 10,
        };
        Self {
            num_users: 10,
            num_days: 30,
            start_date: default_start(),
            planted_motifs: vec![
                motif(2, vec![item(sensors::ACTIVITY, "still")], 0.9),
                motif(
                    7,
                    vec![item(sensors::WIFI, "f8:d1:38:f4:6b:78"), item(sensors::APPLICATION, "com.android.alarm")],
                    0.85,
                ),
                motif(
                    9,
                    vec![
                        item(sensors::WIFI, "00:1a:1e:a8:3c:e1"),
                        item(sensors::APPLICATION, "com.android.email"),
                        item(sensors::BLUETOOTH, "5c:f3:70:11:02:9a"),
                    ],
                    0.8,
                ),
                motif(12, vec![item(sensors::APPLICATION, "com.whatsapp"), item(sensors::SMS, "491234XXXX|send")], 0.6),
                motif(15, vec![item(sensors::CALL, "951603XXXX|outgoing")], 0.55),
                motif(
                    20,
                    vec![
                        item(sensors::WIFI, "f8:d1:38:f4:6b:78"),
                        item(sensors::APPLICATION, "com.netflix.mediaclient"),
                        item(sensors::ACTIVITY, "still"),
                    ],
                    0.7,
                ),
            ],
            noise_entities_per_day: 40,
            dropout_probability: 0.05,
            seed,
            recurrent_noise: true,
        }
    }

    /// 35 users over 60 days with a WiFi-heavy noise load.
    pub fn bench(seed: u64) -> Self {
        Self {
            num_users: 35,
            num_days: 60,
            noise_entities_per_day: 60,
            recurrent_noise: false,
            ..Self::routine(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFiring {
    pub slot_minute: u32,
    pub items: Vec<Item>,
    /// Days on which the motif fired, before per-item dropout.
    pub fired_days: Vec<NaiveDate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub users: BTreeMap<String, Vec<PlantedFiring>>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("ground truth serialization is infallible");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, Default)]
pub struct SyntheticDataset {
    pub users: BTreeMap<String, Vec<DayLog>>,
    pub truth: GroundTruth,
}

pub fn user_id(index: usize) -> String {
    format!("user{index:03}")
}

fn noise_id(sensor: &str, rng: &mut ChaCha8Rng, recurrent: bool, fresh: &str) -> String {
    if recurrent {
        format!("{}-{}", sensor.to_ascii_lowercase(), rng.gen_range(0..RECURRENT_POOL))
    } else {
        format!("{}-{fresh}", sensor.to_ascii_lowercase())
    }
}

fn generate_user(spec: &SynthSpec, index: usize) -> (Vec<DayLog>, Vec<PlantedFiring>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let user = user_id(index);
    let mix = WeightedIndex::new(NOISE_MIX.iter().map(|(_, w)| *w)).expect("positive weights");
    let mut firings: Vec<PlantedFiring> = spec
        .planted_motifs
        .iter()
        .map(|m| PlantedFiring {
            slot_minute: m.slot_minute,
            items: m.items.clone(),
            fired_days: Vec::new(),
        })
        .collect();
    let mut days = Vec::with_capacity(spec.num_days);
    for d in 0..spec.num_days {
        let date = spec.start_date + Duration::days(d as i64);
        let midnight = date.and_hms_opt(0, 0, 0).unwrap();
        let mut entities = Vec::new();
        for (motif, firing) in spec.planted_motifs.iter().zip(firings.iter_mut()) {
            if !rng.gen_bool(motif.repeat_probability) {
                continue;
            }
            firing.fired_days.push(date);
            let j = motif.jitter_minutes as i64;
            let minute = (motif.slot_minute as i64 + rng.gen_range(-j..=j)).clamp(0, MINUTES_PER_DAY as i64 - 1);
            for it in &motif.items {
                if rng.gen_bool(spec.dropout_probability) {
                    continue;
                }
                let seconds = if j > 0 { rng.gen_range(0..60) } else { 0 };
                let t = midnight + Duration::minutes(minute) + Duration::seconds(seconds);
                entities.push(Entity::new(t, it.sensor.clone(), it.data.clone()));
            }
        }
        for k in 0..spec.noise_entities_per_day {
            let sensor = NOISE_MIX[mix.sample(&mut rng)].0;
            let t = midnight + Duration::seconds(rng.gen_range(0..86_400));
            let fresh = format!("{user}-{d}-{k}");
            entities.push(Entity::new(t, sensor, noise_id(sensor, &mut rng, spec.recurrent_noise, &fresh)));
        }
        entities.sort_by(|a, b| (a.timestamp, &a.sensor, &a.data).cmp(&(b.timestamp, &b.sensor, &b.data)));
        days.push(DayLog::new(user.clone(), date, entities));
    }
    (days, firings)
}

/// Deterministic in `spec.seed`; each user draws from its own stream, so the
/// parallel build gives the same result as a sequential one.
pub fn generate_dataset(spec: &SynthSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let generated: Vec<(Vec<DayLog>, Vec<PlantedFiring>)> =
        (0..spec.num_users).into_par_iter().map(|i| generate_user(spec, i)).collect();
    let mut out = SyntheticDataset::default();
    for (i, (days, firings)) in generated.into_iter().enumerate() {
        out.users.insert(user_id(i), days);
        out.truth.users.insert(user_id(i), firings);
    }
    Ok(out)
}

/// Write `<dir>/data/<user>.jsonl` and `<dir>/truth.json`.
pub fn write_dataset(dataset: &SyntheticDataset, dir: &Path) -> Result<()> {
    let data = dir.join("data");
    fs::create_dir_all(&data).map_err(|e| Error::io(&data, e))?;
    for (user, days) in &dataset.users {
        let path = data.join(format!("{user}.jsonl"));
        fs::write(&path, to_canonical_jsonl(days)).map_err(|e| Error::io(&path, e))?;
    }
    let truth = dir.join("truth.json");
    fs::write(&truth, dataset.truth.to_json()).map_err(|e| Error::io(&truth, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Evaluation {
    pub matched_motifs: usize,
    pub total_motifs: usize,
    pub recovered: usize,
    pub planted: usize,
    pub precision: f64,
    pub recall: f64,
    /// No motifs were reported; precision is then 1 by convention.
    pub empty: bool,
}

impl Evaluation {
    fn from_counts(matched_motifs: usize, total_motifs: usize, recovered: usize, planted: usize) -> Self {
        Self {
            matched_motifs,
            total_motifs,
            recovered,
            planted,
            precision: if total_motifs == 0 { 1.0 } else { matched_motifs as f64 / total_motifs as f64 },
            recall: if planted == 0 { 1.0 } else { recovered as f64 / planted as f64 },
            empty: total_motifs == 0,
        }
    }

    /// Pool the counts of several evaluations.
    pub fn combine<'a>(evals: impl IntoIterator<Item = &'a Evaluation>) -> Evaluation {
        let (mut m, mut t, mut r, mut p) = (0, 0, 0, 0);
        for e in evals {
            m += e.matched_motifs;
            t += e.total_motifs;
            r += e.recovered;
            p += e.planted;
        }
        Self::from_counts(m, t, r, p)
    }
}

/// A reported motif matches a planted one when its items are a subset of the
/// planted items, it has at least `theta` of them, and its slot lies within
/// `tolerance_slots` grid cells of the planted slot.
pub fn evaluate_profile(profile: &Profile, planted: &[PlantedFiring], tolerance_slots: u32) -> Evaluation {
    let precision_min = profile.config.granularity.precision();
    let reach = tolerance_slots * precision_min;
    let theta = profile.config.theta as usize;
    let matches = |motif: &crate::mining::Group, p: &PlantedFiring| {
        let items: BTreeSet<&Item> = p.items.iter().collect();
        motif.items.len() >= theta
            && motif.items.iter().all(|i| items.contains(i))
            && motif.slot.minute_of_day().abs_diff(p.slot_minute) <= reach
    };
    let matched = profile
        .motifs
        .iter()
        .filter(|m| planted.iter().any(|p| matches(m, p)))
        .count();
    let recovered = planted
        .iter()
        .filter(|p| profile.motifs.iter().any(|m| matches(m, p)))
        .count();
    Evaluation::from_counts(matched, profile.motifs.len(), recovered, planted.len())
}
