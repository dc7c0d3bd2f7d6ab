//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use lifelog_motifs::analysis::{threshold_sweep, SweepGrid};
use lifelog_motifs::harness::{run_benchmark, BenchOptions};
use lifelog_motifs::ingest::{DayLog, Entity};
use lifelog_motifs::location::{estimate_location_states, LocationState, SignalType, EARTH_RADIUS_M};
use lifelog_motifs::mining::{baseline_profile, build_profile, mine_windows, MiningConfig, Profile};
use lifelog_motifs::pipeline::{mine_user, LocationMode, MiningMode};
use lifelog_motifs::synth::{evaluate_profile, generate_dataset, Evaluation, SynthSpec};
use lifelog_motifs::temporal::{
    apply_granularity, snap_minute, snap_time, GranularityConfig, MINUTES_PER_DAY, STANDARD_PRECISIONS,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// 1. windowed mining over all days equals the all-pairs baseline
// ---------------------------------------------------------------------------

type MotifKey = (u32, BTreeSet<(String, String)>);

/// Brute-force reference: every unordered pair of days, every slot, plain set
/// intersection; support is the union of both dates over all pairs.
fn oracle_motifs(days: &[DayLog], theta: u32, lambda: f64) -> BTreeMap<MotifKey, BTreeSet<NaiveDate>> {
    let slot_items = |day: &DayLog| {
        let mut by_slot: BTreeMap<u32, BTreeSet<(String, String)>> = BTreeMap::new();
        for e in &day.entities {
            by_slot
                .entry(e.granular_time.unwrap().minute_of_day())
                .or_default()
                .insert((e.sensor.clone(), e.data.clone()));
        }
        by_slot
    };
    let indexed: Vec<_> = days.iter().map(slot_items).collect();
    let mut support: BTreeMap<MotifKey, BTreeSet<NaiveDate>> = BTreeMap::new();
    for i in 0..days.len() {
        for j in i + 1..days.len() {
            for (slot, a) in &indexed[i] {
                let Some(b) = indexed[j].get(slot) else { continue };
                let common: BTreeSet<_> = a.intersection(b).cloned().collect();
                if common.len() >= theta as usize {
                    let s = support.entry((*slot, common)).or_default();
                    s.insert(days[i].date);
                    s.insert(days[j].date);
                }
            }
        }
    }
    support.retain(|_, s| 100.0 * s.len() as f64 / days.len() as f64 >= lambda);
    support
}

fn profile_motifs(profile: &Profile) -> BTreeMap<MotifKey, BTreeSet<NaiveDate>> {
    profile
        .motifs
        .iter()
        .map(|m| {
            let items = m.items.iter().map(|i| (i.sensor.clone(), i.data.clone())).collect();
            ((m.slot.minute_of_day(), items), m.support_days.clone())
        })
        .collect()
}

fn random_days(rng: &mut ChaCha8Rng, granularity: GranularityConfig) -> Vec<DayLog> {
    let num_days = rng.gen_range(2..=8);
    let start = NaiveDate::from_ymd_opt(2014, 3, 1).unwrap();
    (0..num_days)
        .map(|d| {
            let date = start + Duration::days(d);
            let n = rng.gen_range(0..=30);
            let entities = (0..n)
                .map(|_| {
                    // a few hot hours and a small alphabet so days collide
                    let minute = rng.gen_range(0..6) * 180 + rng.gen_range(0..40);
                    let t = date.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(minute);
                    let sensor = ["WiFi", "Call", "Application"][rng.gen_range(0..3)];
                    Entity::new(t, sensor, format!("v{}", rng.gen_range(0..4)))
                })
                .collect();
            apply_granularity(DayLog::new("u", date, entities), granularity)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2016);
    let mut nonempty = 0;
    for instance in 0..500 {
        let precision = STANDARD_PRECISIONS[rng.gen_range(0..STANDARD_PRECISIONS.len())];
        let theta = rng.gen_range(1..=3);
        let lambda = [0.0, 20.0, 50.0][rng.gen_range(0..3)];
        let days = random_days(&mut rng, GranularityConfig::new(precision).unwrap());
        let config = MiningConfig::new(theta, lambda, days.len(), precision).unwrap();

        let windowed = build_profile("u", &mine_windows(&days, &config).unwrap(), days.len(), &config);
        let baseline = baseline_profile("u", &days, &config).unwrap();
        let expected = oracle_motifs(&days, theta, lambda);
        if profile_motifs(&windowed) != profile_motifs(&baseline) {
            return Err(format!("instance {instance}: windowed and baseline profiles differ"));
        }
        if profile_motifs(&baseline) != expected {
            return Err(format!("instance {instance}: baseline differs from the brute-force oracle"));
        }
        if windowed.to_json() != baseline.to_json() {
            return Err(format!("instance {instance}: serialized profiles differ"));
        }
        nonempty += usize::from(!expected.is_empty());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        secs < 60.0,
        format!("500/500 instances equal ({nonempty} with motifs) in {secs:.1}s"),
    )
}

// ---------------------------------------------------------------------------
// 2. worked examples
// ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let five = GranularityConfig::new(5).unwrap();
    let snapped = snap_time(NaiveTime::from_hms_opt(11, 8, 0).unwrap(), five).to_string();

    let date = NaiveDate::from_ymd_opt(2014, 1, 6).unwrap();
    let at = |m: i64| date.and_hms_opt(9, 0, 0).unwrap() + Duration::minutes(m);
    let wifi: Vec<Entity> = ["w1", "w2", "w3", "w4", "w1", "w3"]
        .iter()
        .enumerate()
        .map(|(i, b)| Entity::new(at(6 * i as i64), "WiFi", *b))
        .collect();
    let wifi_states: Vec<LocationState> = estimate_location_states(&wifi, SignalType::WifiOnly)
        .events
        .iter()
        .map(|e| e.state)
        .filter(|s| *s != LocationState::Unknown)
        .collect();

    // 450 m per step due north, so p1 to p3 is 900 m
    let step = 450.0 / (EARTH_RADIUS_M * std::f64::consts::PI / 180.0);
    let cell: Vec<Entity> = (0..3)
        .map(|i| Entity::new(at(2 * i), "Location", format!("{},13.4,network", 52.0 + step * i as f64)))
        .collect();
    let cell_states: Vec<LocationState> = estimate_location_states(&cell, SignalType::Fused)
        .events
        .iter()
        .map(|e| e.state)
        .filter(|s| *s != LocationState::Unknown)
        .collect();

    let detail = format!("snap(11:08, 5')={snapped}; wifi={wifi_states:?}; cell={cell_states:?}");
    check(
        snapped == "11:10"
            && wifi_states == [LocationState::Stationary]
            && cell_states == [LocationState::Moving],
        detail,
    )
}

// ---------------------------------------------------------------------------
// 3. scalability: comparison counts and wall time
// ---------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let users = generate_dataset(&SynthSpec::bench(42)).map_err(|e| e.to_string())?.users;
    let options = BenchOptions {
        days_schedule: vec![60],
        window_sizes: vec![2, 3, 4, 6],
        repetitions: 3,
        threads: 1,
        ..BenchOptions::default()
    };
    let mut timing_wins = 0;
    let mut counts = None;
    for _ in 0..10 {
        let rows = run_benchmark(&users, &options).map_err(|e| e.to_string())?;
        let baseline = rows.iter().find(|r| r.window.is_none()).unwrap();
        if rows
            .iter()
            .filter(|r| r.window.is_some())
            .all(|r| baseline.wall_time_ms > r.wall_time_ms)
        {
            timing_wins += 1;
        }
        let by_window: BTreeMap<String, _> = rows.iter().map(|r| (r.window_label(), r.stats)).collect();
        counts = Some(by_window);
    }
    let counts = counts.unwrap();
    let (base, ws2, ws6) = (counts["baseline"], counts["2"], counts["6"]);
    let d = 60u64;
    let expected_pairs = users.len() as u64 * d * (d - 1) / 2;
    let secs = started.elapsed().as_secs_f64();
    let detail = format!(
        "comparisons baseline={} ws2={} ws6={}; baseline day pairs={} (expected {expected_pairs}); \
         baseline slowest in {timing_wins}/10 runs; {secs:.0}s",
        base.comparisons(),
        ws2.comparisons(),
        ws6.comparisons(),
        base.day_pairs
    );
    check(
        base.comparisons() > ws2.comparisons()
            && ws2.comparisons() > ws6.comparisons()
            && base.day_pairs == expected_pairs
            && timing_wins >= 9
            && secs < 300.0,
        detail,
    )
}

// ---------------------------------------------------------------------------
// 4. coarse granularity recovers jittered motifs better than 5'
// ---------------------------------------------------------------------------

fn jittered_spec(seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::routine(seed);
    for m in &mut spec.planted_motifs {
        m.repeat_probability = 0.8;
        m.jitter_minutes = 10;
    }
    spec
}

fn mean_recall(granularity: u32, seeds: &[u64]) -> Result<f64, String> {
    let mut total = 0.0;
    for &seed in seeds {
        let data = generate_dataset(&jittered_spec(seed)).map_err(|e| e.to_string())?;
        let config = MiningConfig::new(1, 20.0, 3, granularity).map_err(|e| e.to_string())?;
        let mut evals = Vec::new();
        for (user, days) in &data.users {
            let (profile, _) =
                mine_user(user, days, &config, LocationMode::Off, MiningMode::Windowed).map_err(|e| e.to_string())?;
            evals.push(evaluate_profile(&profile, &data.truth.users[user], 1));
        }
        total += Evaluation::combine(&evals).recall;
    }
    Ok(total / seeds.len() as f64)
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let seeds: Vec<u64> = (0..20).collect();
    let coarse = mean_recall(60, &seeds)?;
    let fine = mean_recall(5, &seeds)?;
    let secs = started.elapsed().as_secs_f64();
    check(
        coarse - fine >= 0.15 && coarse >= 0.85 && secs < 120.0,
        format!("mean recall 60'={coarse:.3} 5'={fine:.3} (gap {:.3}); {secs:.0}s", coarse - fine),
    )
}

// ---------------------------------------------------------------------------
// 5. motif count falls with theta and lambda
// ---------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let thetas = vec![1, 2, 3, 4];
    let lambdas = vec![0.0, 20.0, 40.0, 60.0];
    let grid = |location| SweepGrid {
        thetas: thetas.clone(),
        lambdas: lambdas.clone(),
        granularities: vec![60],
        window_size: 3,
        location,
        mode: MiningMode::Windowed,
    };
    let count_table = |users: &BTreeMap<String, Vec<DayLog>>, location| -> Result<BTreeMap<(u32, u64), usize>, String> {
        threshold_sweep(users, &grid(location))
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| {
                r.motif_count
                    .map(|c| ((r.theta, r.lambda_pct as u64), c))
                    .ok_or_else(|| format!("cell theta={} lambda={} failed", r.theta, r.lambda_pct))
            })
            .collect()
    };
    let monotone = |table: &BTreeMap<(u32, u64), usize>| {
        thetas.iter().all(|&t| {
            lambdas.iter().all(|&l| {
                let here = table[&(t, l as u64)];
                let next_theta = table.get(&(t + 1, l as u64)).is_none_or(|&c| c <= here);
                let next_lambda = lambdas
                    .iter()
                    .find(|&&x| x > l)
                    .is_none_or(|&x| table[&(t, x as u64)] <= here);
                next_theta && next_lambda
            })
        })
    };

    // monotonicity on several datasets, including one with location signals
    let mut checked = 0;
    for seed in [1u64, 2, 3] {
        let users = generate_dataset(&SynthSpec::routine(seed)).map_err(|e| e.to_string())?.users;
        for location in [LocationMode::Off, LocationMode::Fused] {
            let table = count_table(&users, location)?;
            if !monotone(&table) {
                return Err(format!("counts not monotone for seed {seed}, {location:?}: {table:?}"));
            }
            checked += 1;
        }
    }

    let routine = generate_dataset(&SynthSpec::routine(42)).map_err(|e| e.to_string())?.users;
    let table = count_table(&routine, LocationMode::Off)?;
    let ratios: Vec<String> = lambdas
        .iter()
        .map(|&l| format!("l{}={}/{}", l, table[&(4, l as u64)], table[&(2, l as u64)]))
        .collect();
    let confident_ok = lambdas.iter().filter(|&&l| l >= 20.0).all(|&l| {
        let (t2, t4) = (table[&(2, l as u64)], table[&(4, l as u64)]);
        t2 > 0 && (t4 as f64) < 0.10 * t2 as f64 || t2 == 0 && t4 == 0
    });
    let at_default = (table[&(4, 20)] as f64) < 0.10 * table[&(2, 20)] as f64;
    let secs = started.elapsed().as_secs_f64();
    check(
        confident_ok && at_default && secs < 120.0,
        format!(
            "monotone on {checked} sweeps; theta4/theta2 motif counts {}; {secs:.0}s",
            ratios.join(" ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. snapping properties, exhaustively
// ---------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let mut cases = 0;
    for &p in &STANDARD_PRECISIONS {
        let g = GranularityConfig::new(p).unwrap();
        let mut previous = 0;
        for minute in 0..MINUTES_PER_DAY {
            let s = snap_minute(minute, g).minute_of_day();
            if snap_minute(s, g).minute_of_day() != s {
                return Err(format!("not idempotent at {minute} for {p}'"));
            }
            if s < previous {
                return Err(format!("not monotone at {minute} for {p}'"));
            }
            if 2 * s.abs_diff(minute) > p {
                return Err(format!("{minute} moved to {s} for {p}'"));
            }
            if s % p != 0 {
                return Err(format!("{minute} snapped off the {p}' grid"));
            }
            previous = s;
            cases += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 5.0, format!("{cases} minute/precision cases hold in {secs:.2}s"))
}

// ---------------------------------------------------------------------------
// 7. CLI determinism
// ---------------------------------------------------------------------------

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_lifelog-motifs"))
        .args(args)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited with {status}"))
    }
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    for run in ["a", "b"] {
        run_cli(&["synth", "--preset", "routine", "--seed", "7", "--out", &path(&format!("synth_{run}"))])?;
    }
    let data = path("synth_a/data");
    for run in ["a", "b"] {
        run_cli(&[
            "mine", "--in", &data, "--granularity", "60", "--theta", "2", "--lambda", "20", "--window", "3", "--out",
            &path(&format!("mine_{run}")),
        ])?;
    }
    let synth_a = tree_bytes(&tmp.path().join("synth_a"));
    let synth_b = tree_bytes(&tmp.path().join("synth_b"));
    let mine_a = tree_bytes(&tmp.path().join("mine_a"));
    let mine_b = tree_bytes(&tmp.path().join("mine_b"));
    check(
        !synth_a.is_empty() && synth_a == synth_b && !mine_a.is_empty() && mine_a == mine_b,
        format!("synth: {} files identical; mine: {} files identical", synth_a.len(), mine_a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 oracle equivalence", criterion_1),
        ("2 worked examples", criterion_2),
        ("3 scalability trend", criterion_3),
        ("4 granularity trend", criterion_4),
        ("5 threshold monotonicity", criterion_5),
        ("6 snap properties", criterion_6),
        ("7 determinism", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("criterion {name}: PASS ({detail})"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {name}: FAIL (panicked)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
