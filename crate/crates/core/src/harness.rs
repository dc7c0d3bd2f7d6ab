//! Window-size benchmark: wall time and exact comparison counts.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::DayLog;
use crate::mining::{MiningConfig, MiningStats};
use crate::pipeline::{mine_prepared, prepare_days, LocationMode, MiningMode};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub days_schedule: Vec<usize>,
    pub window_sizes: Vec<usize>,
    /// Timed runs per cell, after one discarded warm-up run.
    pub repetitions: usize,
    /// 1 mines users one after another; more runs them on a pool of that size.
    pub threads: usize,
    pub theta: u32,
    pub lambda_pct: f64,
    pub granularity: u32,
    pub location: LocationMode,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            days_schedule: vec![10, 20, 30, 40, 50, 60],
            window_sizes: vec![2, 3, 4, 6],
            repetitions: 3,
            threads: 1,
            theta: 1,
            lambda_pct: 0.0,
            granularity: 60,
            location: LocationMode::Fused,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub num_days: usize,
    /// `None` for the all-pairs baseline.
    pub window: Option<usize>,
    pub wall_time_ms: f64,
    pub stats: MiningStats,
}

impl BenchRow {
    pub fn window_label(&self) -> String {
        self.window.map_or_else(|| "baseline".to_string(), |w| w.to_string())
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn mine_everyone(users: &[(String, Vec<DayLog>)], config: &MiningConfig, mode: MiningMode) -> Result<MiningStats> {
    let mut total = MiningStats::default();
    for (user, days) in users {
        mine_prepared(user, days, config, mode, &mut total)?;
    }
    Ok(total)
}

fn mine_everyone_parallel(
    users: &[(String, Vec<DayLog>)],
    config: &MiningConfig,
    mode: MiningMode,
) -> Result<MiningStats> {
    let per_user = users
        .par_iter()
        .map(|(user, days)| {
            let mut stats = MiningStats::default();
            mine_prepared(user, days, config, mode, &mut stats).map(|_| stats)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = MiningStats::default();
    per_user.iter().for_each(|s| total.add(s));
    Ok(total)
}

/// For each day count and each window size plus the baseline, mine the first
/// `d` days of every user. Days are prepared (location and grid) outside the
/// timed region; counts are summed over users.
pub fn run_benchmark(users: &BTreeMap<String, Vec<DayLog>>, options: &BenchOptions) -> Result<Vec<BenchRow>> {
    if options.repetitions < 3 {
        return Err(Error::Config("benchmark needs at least 3 repetitions".into()));
    }
    if users.is_empty() {
        return Err(Error::NoUsers);
    }
    let max_days = options.days_schedule.iter().copied().max().unwrap_or(0);
    if let Some(short) = users.values().map(Vec::len).find(|&n| n < max_days) {
        return Err(Error::InsufficientData(short));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut cells: Vec<Option<usize>> = vec![None];
    cells.extend(options.window_sizes.iter().copied().map(Some));

    let mut rows = Vec::new();
    for &d in &options.days_schedule {
        let granularity = MiningConfig::new(options.theta, options.lambda_pct, 2, options.granularity)?.granularity;
        let prepared: Vec<(String, Vec<DayLog>)> = users
            .iter()
            .map(|(u, days)| (u.clone(), prepare_days(&days[..d], options.location, granularity)))
            .collect();
        for &window in &cells {
            let config = MiningConfig::new(options.theta, options.lambda_pct, window.unwrap_or(2), options.granularity)?;
            let mode = if window.is_some() { MiningMode::Windowed } else { MiningMode::Baseline };
            let run = || {
                if options.threads <= 1 {
                    mine_everyone(&prepared, &config, mode)
                } else {
                    pool.install(|| mine_everyone_parallel(&prepared, &config, mode))
                }
            };
            let stats = run()?;
            let mut times = Vec::with_capacity(options.repetitions);
            for _ in 0..options.repetitions {
                let start = Instant::now();
                let again = run()?;
                times.push(start.elapsed().as_secs_f64() * 1000.0);
                debug_assert_eq!(again, stats);
            }
            log::info!("bench d={d} window={window:?}: {} comparisons", stats.comparisons());
            rows.push(BenchRow {
                num_days: d,
                window,
                wall_time_ms: median(times),
                stats,
            });
        }
    }
    Ok(rows)
}

/// `num_days,window,wall_time_ms,comparisons,day_pairs,behavior_pairs`.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["num_days", "window", "wall_time_ms", "comparisons", "day_pairs", "behavior_pairs"])?;
    for r in rows {
        writer.write_record([
            r.num_days.to_string(),
            r.window_label(),
            format!("{:.3}", r.wall_time_ms),
            r.stats.comparisons().to_string(),
            r.stats.day_pairs.to_string(),
            r.stats.behavior_pairs.to_string(),
        ])?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}
