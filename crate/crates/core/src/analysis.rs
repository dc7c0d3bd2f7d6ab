//! Motif distribution over day segments, per-user feature vectors, and
//! threshold sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::DayLog;
use crate::mining::{MiningConfig, Profile};
use crate::pipeline::{mine_user, LocationMode, MiningMode};
use crate::temporal::MINUTES_PER_DAY;

/// Confidence at or above this counts as "high" in a feature vector.
pub const HIGH_CONFIDENCE_PCT: f64 = 20.0;

/// Half-open `[start_minute, end_minute)` part of the day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaySegment {
    pub label: String,
    pub start_minute: u32,
    pub end_minute: u32,
}

impl DaySegment {
    pub fn new(label: impl Into<String>, start_minute: u32, end_minute: u32) -> Self {
        Self {
            label: label.into(),
            start_minute,
            end_minute,
        }
    }

    /// `0-8`, `8-16`, `16-24`.
    pub fn default_segments() -> Vec<DaySegment> {
        vec![
            DaySegment::new("0-8", 0, 480),
            DaySegment::new("8-16", 480, 960),
            DaySegment::new("16-24", 960, MINUTES_PER_DAY),
        ]
    }
}

/// Segments must tile `[0, 1440)` in order.
pub fn validate_segments(segments: &[DaySegment]) -> Result<()> {
    let mut expected = 0;
    for s in segments {
        if s.start_minute >= s.end_minute {
            return Err(Error::Config(format!("segment {} is empty or reversed", s.label)));
        }
        if s.start_minute != expected {
            return Err(Error::Config(format!(
                "segment {} starts at minute {}, expected {expected}",
                s.label, s.start_minute
            )));
        }
        expected = s.end_minute;
    }
    if expected != MINUTES_PER_DAY {
        return Err(Error::Config(format!("segments end at minute {expected}, not 1440")));
    }
    Ok(())
}

/// Index of the segment holding `minute`. A slot at 24:00 belongs to the last one.
fn segment_of(segments: &[DaySegment], minute: u32) -> usize {
    let minute = minute.min(MINUTES_PER_DAY - 1);
    segments
        .iter()
        .position(|s| s.start_minute <= minute && minute < s.end_minute)
        .expect("validated segments cover the day")
}

/// Motif count per segment label, in segment order.
pub fn segment_distribution(profile: &Profile, segments: &[DaySegment]) -> Result<Vec<(String, usize)>> {
    validate_segments(segments)?;
    let mut counts = vec![0usize; segments.len()];
    for m in &profile.motifs {
        counts[segment_of(segments, m.slot.minute_of_day())] += 1;
    }
    Ok(segments.iter().map(|s| s.label.clone()).zip(counts).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserFeatureVector {
    pub user_id: String,
    /// `(0-8 low, 0-8 high, 8-16 low, 8-16 high, 16-24 low, 16-24 high)`.
    pub counts: [usize; 6],
}

pub fn user_feature_vector(profile: &Profile) -> UserFeatureVector {
    let segments = DaySegment::default_segments();
    let mut counts = [0usize; 6];
    for m in &profile.motifs {
        let high = usize::from(m.confidence_pct >= HIGH_CONFIDENCE_PCT);
        counts[2 * segment_of(&segments, m.slot.minute_of_day()) + high] += 1;
    }
    UserFeatureVector {
        user_id: profile.user_id.clone(),
        counts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: u32,
    pub lambda_pct: f64,
    pub granularity: u32,
    /// Total motifs over all users; `None` when any user's run failed.
    pub motif_count: Option<usize>,
    pub mean_per_user: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub thetas: Vec<u32>,
    pub lambdas: Vec<f64>,
    pub granularities: Vec<u32>,
    pub window_size: usize,
    pub location: LocationMode,
    pub mode: MiningMode,
}

/// Run the full pipeline once per `(theta, lambda, granularity)` cell. Cells
/// are independent and run in parallel; rows come back in grid order.
pub fn threshold_sweep(users: &BTreeMap<String, Vec<DayLog>>, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.thetas.is_empty() || grid.lambdas.is_empty() || grid.granularities.is_empty() {
        return Err(Error::Config("sweep grid has an empty axis".into()));
    }
    if users.is_empty() {
        return Err(Error::NoUsers);
    }
    let mut cells = Vec::new();
    for &g in &grid.granularities {
        for &theta in &grid.thetas {
            for &lambda in &grid.lambdas {
                cells.push((theta, lambda, g));
            }
        }
    }
    Ok(cells
        .par_iter()
        .map(|&(theta, lambda_pct, granularity)| {
            let total = MiningConfig::new(theta, lambda_pct, grid.window_size, granularity).and_then(|config| {
                users.iter().try_fold(0usize, |acc, (user, days)| {
                    mine_user(user, days, &config, grid.location, grid.mode).map(|(p, _)| acc + p.motifs.len())
                })
            });
            if let Err(e) = &total {
                log::warn!("sweep cell theta={theta} lambda={lambda_pct} granularity={granularity}: {e}");
            }
            let motif_count = total.ok();
            SweepRow {
                theta,
                lambda_pct,
                granularity,
                motif_count,
                mean_per_user: motif_count.map(|c| c as f64 / users.len() as f64),
            }
        })
        .collect())
}

fn flush<W: Write>(writer: csv::Writer<W>) -> Result<()> {
    writer
        .into_inner()
        .map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}

/// `theta,lambda,granularity,motif_count,mean_per_user`; failed cells are `NA`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["theta", "lambda", "granularity", "motif_count", "mean_per_user"])?;
    for r in rows {
        writer.write_record([
            r.theta.to_string(),
            r.lambda_pct.to_string(),
            r.granularity.to_string(),
            r.motif_count.map_or("NA".into(), |c| c.to_string()),
            r.mean_per_user.map_or("NA".into(), |m| format!("{m:.3}")),
        ])?;
    }
    flush(writer)
}

/// `user_id,segment,count`.
pub fn write_segments_csv<W: Write>(profiles: &[Profile], segments: &[DaySegment], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["user_id", "segment", "count"])?;
    for p in profiles {
        for (label, count) in segment_distribution(p, segments)? {
            writer.write_record([p.user_id.as_str(), label.as_str(), &count.to_string()])?;
        }
    }
    flush(writer)
}

/// `user_id,t1..t6`.
pub fn write_features_csv<W: Write>(profiles: &[Profile], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["user_id", "t1", "t2", "t3", "t4", "t5", "t6"])?;
    for p in profiles {
        let v = user_feature_vector(p);
        let mut row = vec![v.user_id];
        row.extend(v.counts.iter().map(ToString::to_string));
        writer.write_record(&row)?;
    }
    flush(writer)
}
