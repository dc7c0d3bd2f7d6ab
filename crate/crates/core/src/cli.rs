//! Command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use chrono::FixedOffset;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, DaySegment, SweepGrid};
use crate::error::Error;
use crate::harness::{self, BenchOptions};
use crate::ingest::{self, DayLog, LoadOptions, ParseOptions, SourceFormat};
use crate::mining::{MiningConfig, Profile};
use crate::pipeline::{mine_all, LocationMode, MiningMode};
use crate::synth::{self, Evaluation, GroundTruth, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "lifelog-motifs", version, about = "Mine recurring daily motifs from multi-sensor lifelogs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw logs and write canonical JSON lines, one file per user.
    Ingest(IngestArgs),
    /// Mine one profile per user.
    Mine(MineArgs),
    /// Motif counts over a grid of theta, lambda and granularity.
    Sweep(SweepArgs),
    /// Day-segment counts and feature vectors from mined profiles.
    Segments(SegmentsArgs),
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Time windowed mining against the all-pairs baseline.
    Bench(BenchArgs),
    /// Score mined profiles against synthetic ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Auto,
    Ubiqlog,
    Generic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LocationArg {
    Off,
    Wifi,
    Fused,
}

impl From<LocationArg> for LocationMode {
    fn from(l: LocationArg) -> Self {
        match l {
            LocationArg::Off => LocationMode::Off,
            LocationArg::Wifi => LocationMode::WifiOnly,
            LocationArg::Fused => LocationMode::Fused,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Directory with one file or subdirectory per user.
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
    /// UTC offset used for zoned timestamps, e.g. +01:00.
    #[arg(long, default_value = "+00:00", allow_hyphen_values = true)]
    pub tz_offset: String,
    /// Drop weekend days before mining.
    #[arg(long)]
    pub exclude_weekend: bool,
    /// Comma-separated weekday names treated as weekend.
    #[arg(long, default_value = "fri")]
    pub weekend_days: String,
}

#[derive(Debug, Args)]
pub struct MiningArgs {
    /// JSON file with theta, lambda, window and granularity; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<u32>,
    /// Minimum motif confidence in percent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Window size in days.
    #[arg(long)]
    pub window: Option<usize>,
    /// Grid precision in minutes; must divide 1440.
    #[arg(long)]
    pub granularity: Option<u32>,
    #[arg(long, value_enum, default_value = "fused")]
    pub location: LocationArg,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write rejected lines as CSV (user_id,line_no,reason).
    #[arg(long, value_name = "FILE")]
    pub rejections: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mining: MiningArgs,
    /// Compare all day pairs instead of windowing.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub thetas: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0,20,40,60")]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "60")]
    pub granularities: Vec<u32>,
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[arg(long, value_enum, default_value = "fused")]
    pub location: LocationArg,
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentsArgs {
    /// Directory of profile JSON files written by `mine`.
    #[arg(long, value_name = "DIR")]
    pub profiles: PathBuf,
    /// Receives segments.csv and features.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Routine,
    Bench,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Receives data/<user>.jsonl and truth.json.
    #[arg(long, value_name = "DIR", required_unless_present = "print_spec")]
    pub out: Option<PathBuf>,
    /// Print the resolved spec as JSON and exit.
    #[arg(long)]
    pub print_spec: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Synthetic spec to generate the benchmark data from.
    #[arg(long, value_name = "FILE", conflicts_with = "input")]
    pub synth_spec: Option<PathBuf>,
    /// Benchmark on an existing dataset instead.
    #[arg(long = "in", value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
    pub days: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,6")]
    pub windows: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 1)]
    pub theta: u32,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 60)]
    pub granularity: u32,
    #[arg(long, value_enum, default_value = "fused")]
    pub location: LocationArg,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub profiles: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Allowed slot distance in grid cells.
    #[arg(long, default_value_t = 1)]
    pub tolerance: u32,
    /// Write per-user and pooled scores as JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn require_path(path: &Path) -> CmdResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("input path {} does not exist", path.display())))
    }
}

fn create_file(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut out = create_file(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn load_options(args: &InputArgs) -> std::result::Result<LoadOptions, Failure> {
    let offset: FixedOffset = args
        .tz_offset
        .parse()
        .map_err(|_| Failure::Usage(format!("bad --tz-offset {:?}", args.tz_offset)))?;
    let weekend_days = ingest::parse_weekdays(&args.weekend_days).map_err(Failure::Usage)?;
    let format = match args.format {
        FormatArg::Auto => SourceFormat::Auto,
        FormatArg::Ubiqlog => SourceFormat::Ubiqlog,
        FormatArg::Generic => SourceFormat::Generic,
    };
    Ok(LoadOptions {
        parse: ParseOptions {
            format,
            offset,
            ..ParseOptions::default()
        },
        exclude_weekend: args.exclude_weekend,
        weekend_days,
    })
}

fn load_users(args: &InputArgs) -> std::result::Result<BTreeMap<String, Vec<DayLog>>, Failure> {
    require_path(&args.input)?;
    let options = load_options(args)?;
    let dataset = ingest::load_dataset(&args.input, &options)?;
    if !dataset.rejections.is_empty() {
        log::warn!("{} lines rejected while loading", dataset.rejections.len());
    }
    let users: BTreeMap<String, Vec<DayLog>> = dataset.users.into_iter().filter(|(_, d)| !d.is_empty()).collect();
    if users.is_empty() {
        return Err(Error::NoUsers.into());
    }
    Ok(users)
}

fn mining_config(args: &MiningArgs) -> std::result::Result<MiningConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            require_path(path)?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<MiningConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => MiningConfig::new(1, 20.0, 3, 60)?,
    };
    if let Some(t) = args.theta {
        config.theta = t;
    }
    if let Some(l) = args.lambda {
        config.lambda_pct = l;
    }
    if let Some(w) = args.window {
        config.window_size = w;
    }
    if let Some(g) = args.granularity {
        config.granularity = crate::temporal::GranularityConfig::new(g).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn cmd_ingest(args: IngestArgs) -> CmdResult {
    require_path(&args.input.input)?;
    let options = load_options(&args.input)?;
    let dataset = ingest::load_dataset(&args.input.input, &options)?;
    if dataset.lines.is_empty() {
        return Err(Error::NoUsers.into());
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (user, days) in &dataset.users {
        write_text(&args.out.join(format!("{user}.jsonl")), &ingest::to_canonical_jsonl(days))?;
    }
    if let Some(path) = &args.rejections {
        dataset.write_rejections(create_file(path)?)?;
    }
    for (user, rejected) in dataset.rejection_counts() {
        let days = dataset.users.get(user).map_or(0, Vec::len);
        eprintln!("{user}: {days} days, {} lines, {rejected} rejected", dataset.lines[user]);
    }
    Ok(())
}

fn cmd_mine(args: MineArgs) -> CmdResult {
    let config = mining_config(&args.mining)?;
    let users = load_users(&args.input)?;
    let mode = if args.baseline { MiningMode::Baseline } else { MiningMode::Windowed };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut written = 0;
    for (user, result) in mine_all(&users, &config, args.mining.location.into(), mode) {
        match result {
            Ok((profile, _)) => {
                write_text(&args.out.join(format!("{user}.json")), &profile.to_json())?;
                written += 1;
            }
            Err(e) => eprintln!("{user}: skipped: {e}"),
        }
    }
    if written == 0 {
        return Err(Failure::Data(anyhow!("no profile could be mined")));
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let users = load_users(&args.input)?;
    let grid = SweepGrid {
        thetas: args.thetas,
        lambdas: args.lambdas,
        granularities: args.granularities,
        window_size: args.window,
        location: args.location.into(),
        mode: if args.baseline { MiningMode::Baseline } else { MiningMode::Windowed },
    };
    let rows = analysis::threshold_sweep(&users, &grid)?;
    analysis::write_sweep_csv(&rows, create_file(&args.out)?)?;
    Ok(())
}

fn read_profiles(dir: &Path) -> std::result::Result<Vec<Profile>, Failure> {
    require_path(dir)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let profiles = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<Profile>(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if profiles.is_empty() {
        return Err(Failure::Data(anyhow!("no profiles found in {}", dir.display())));
    }
    Ok(profiles)
}

fn cmd_segments(args: SegmentsArgs) -> CmdResult {
    let profiles = read_profiles(&args.profiles)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    analysis::write_segments_csv(
        &profiles,
        &DaySegment::default_segments(),
        create_file(&args.out.join("segments.csv"))?,
    )?;
    analysis::write_features_csv(&profiles, create_file(&args.out.join("features.csv"))?)?;
    Ok(())
}

fn read_spec(path: &Path) -> std::result::Result<SynthSpec, Failure> {
    require_path(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SynthSpec::from_json(&text)?)
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let mut spec = match (&args.spec, args.preset) {
        (Some(path), _) => read_spec(path)?,
        (None, Some(PresetArg::Bench)) => SynthSpec::bench(42),
        (None, _) => SynthSpec::routine(42),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.print_spec {
        println!("{}", serde_json::to_string_pretty(&spec).context("serializing spec")?);
        return Ok(());
    }
    let out = args.out.expect("clap requires --out");
    let dataset = synth::generate_dataset(&spec)?;
    synth::write_dataset(&dataset, &out)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let users = match (&args.synth_spec, &args.input) {
        (Some(path), _) => synth::generate_dataset(&read_spec(path)?)?.users,
        (None, Some(dir)) => {
            require_path(dir)?;
            let users = ingest::load_dataset(dir, &LoadOptions::default())?.users;
            if users.is_empty() {
                return Err(Error::NoUsers.into());
            }
            users
        }
        (None, None) => synth::generate_dataset(&SynthSpec::bench(42))?.users,
    };
    let options = BenchOptions {
        days_schedule: args.days,
        window_sizes: args.windows,
        repetitions: args.repetitions,
        threads: args.threads,
        theta: args.theta,
        lambda_pct: args.lambda,
        granularity: args.granularity,
        location: args.location.into(),
    };
    let rows = harness::run_benchmark(&users, &options)?;
    harness::write_bench_csv(&rows, create_file(&args.out)?)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let profiles = read_profiles(&args.profiles)?;
    require_path(&args.truth)?;
    let text = fs::read_to_string(&args.truth).with_context(|| format!("reading {}", args.truth.display()))?;
    let truth: GroundTruth = serde_json::from_str(&text).context("parsing ground truth")?;
    let mut per_user = BTreeMap::new();
    for p in &profiles {
        let planted = truth.users.get(&p.user_id).map(Vec::as_slice).unwrap_or(&[]);
        per_user.insert(p.user_id.clone(), synth::evaluate_profile(p, planted, args.tolerance));
    }
    let pooled = Evaluation::combine(per_user.values());
    let report = serde_json::json!({ "pooled": pooled, "users": per_user });
    let mut text = serde_json::to_string_pretty(&report).context("serializing scores")?;
    text.push('\n');
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Parse `argv`, run the command, and map failures to exit codes: 2 for
/// usage problems and missing inputs, 1 for data errors.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Mine(a) => cmd_mine(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Segments(a) => cmd_segments(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
