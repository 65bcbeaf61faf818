//! The `coopinit` command line: `run`, `compare` and `sweep`.
//!
//! A run directory holds
//!
//! ```text
//! manifest.txt     key-sorted `key = value` lines: config, seed, build, schedule
//! config.toml      the effective configuration (when representable in TOML)
//! metrics.csv      one row per evaluation
//! checkpoints/     ckpt_<consumed>.bin every --checkpoint-every examples, final.bin
//! snapshots/       snap_<consumed>_<stage>.svg scatter plots
//! ```
//!
//! Exit codes: 0 success, 1 run failure, 2 configuration or usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::adversarial::LossKind;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::persistence::{self, MetricsSink};
use crate::plot::Scatter;
use crate::rng;
use crate::trainer::{self, RunObserver, RunOutcome, RunRecord, RunSetup, Stage, TrainerState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const SNAPSHOT_POINTS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "coopinit", version, about = "Cooperative initialization for GANs on toy mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one seeded run into an output directory.
    Run(RunArgs),
    /// Summarize finished runs side by side.
    Compare(CompareArgs),
    /// Run a grid over one hyperparameter and seeds, then compare.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration; defaults to the flagship 8-ring setup.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "steps-t")]
    pub steps_t: Option<usize>,
    #[arg(long = "ncoop-frac")]
    pub ncoop_frac: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "total-examples")]
    pub total_examples: Option<u64>,
    #[arg(long = "checkpoint-every")]
    pub checkpoint_every: Option<u64>,
    /// Fill the wall_ms column (makes metrics.csv time dependent).
    #[arg(long = "record-wall-ms")]
    pub record_wall_ms: bool,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

impl Overrides {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::flagship(),
        };
        if let Some(v) = self.loss {
            cfg.adversarial.loss = v;
        }
        if let Some(v) = self.eta {
            cfg.langevin.eta = v;
        }
        if let Some(v) = self.steps_t {
            cfg.langevin.steps = v;
        }
        if let Some(v) = self.ncoop_frac {
            cfg.schedule.ncoop_frac = v;
        }
        if let Some(v) = self.gamma {
            cfg.adversarial.gamma = v;
        }
        if let Some(v) = self.total_examples {
            cfg.schedule.total_examples = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.schedule.checkpoint_every = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Examples between scatter snapshots (default: the evaluation interval).
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(required = true, num_args = 2..)]
    pub runs: Vec<PathBuf>,
    /// Per-run CSV; group means go to the same path with `.groups.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    NcoopFrac,
    Eta,
    StepsT,
    Gamma,
    /// All four learning rates (both stages, both networks).
    Lr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NcoopFrac => "ncoop_frac",
            SweepAxis::Eta => "eta",
            SweepAxis::StepsT => "steps_t",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Lr => "lr",
        }
    }

    pub fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::NcoopFrac => cfg.schedule.ncoop_frac = value,
            SweepAxis::Eta => cfg.langevin.eta = value,
            SweepAxis::StepsT => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::config("--values", format!("steps_t {value} is not a count")));
                }
                cfg.langevin.steps = value as usize;
            }
            SweepAxis::Gamma => cfg.adversarial.gamma = value,
            SweepAxis::Lr => {
                cfg.cooperative.lr_d = value;
                cfg.cooperative.lr_g = value;
                cfg.adversarial.lr_d = value;
                cfg.adversarial.lr_g = value;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Concurrent runs (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<u64>,
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run_command(&a).map(|_| EXIT_OK),
        Command::Compare(a) => compare_command(&a).map(|report| {
            print!("{}", report.render());
            EXIT_OK
        }),
        Command::Sweep(a) => sweep_command(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_RUN_FAILURE,
    }
}

/// Everything a run directory needs besides the configuration.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub snapshot_every: Option<u64>,
    pub force: bool,
    pub record_wall_ms: bool,
    pub config_path: Option<PathBuf>,
}

pub fn run_command(args: &RunArgs) -> Result<RunOutcome> {
    let mut cfg = args.overrides.load()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let opts = RunOptions {
        out: args.out.clone(),
        snapshot_every: args.snapshot_every,
        force: args.overrides.force,
        record_wall_ms: args.overrides.record_wall_ms,
        config_path: args.overrides.config.clone(),
    };
    let outcome = run_to_dir(&cfg, &opts)?;
    if let Some(last) = outcome.records.last() {
        println!(
            "{}: consumed {} modes {} hq {:.3} energy {:.4e}",
            opts.out.display(),
            last.consumed,
            last.modes_covered,
            last.hq_fraction,
            last.energy_distance
        );
    }
    Ok(outcome)
}

fn prepare_out_dir(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        let non_empty = fs::read_dir(out)
            .map_err(|e| Error::io(out, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::config(
                "--out",
                format!("{} is not empty (use --force to write into it)", out.display()),
            ));
        }
    }
    for sub in ["", "checkpoints", "snapshots"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    Ok(())
}

fn manifest_entries(cfg: &RunConfig, setup: &RunSetup, opts: &RunOptions) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let json = serde_json::to_value(cfg).expect("run configs always serialize");
    persistence::flatten_json("config", &json, &mut m);
    let t = &setup.train;
    m.insert("seed".into(), cfg.seed.to_string());
    m.insert("build".into(), format!("coopinit {}", env!("CARGO_PKG_VERSION")));
    m.insert(
        "config_path".into(),
        opts.config_path
            .as_ref()
            .map_or("builtin flagship".into(), |p| p.display().to_string()),
    );
    m.insert("schedule.n_coop".into(), t.n_coop.to_string());
    m.insert("schedule.n_adv".into(), t.n_adv.to_string());
    m.insert("schedule.coop_iterations".into(), t.coop_iterations().to_string());
    m.insert("schedule.adv_iterations".into(), t.adv_iterations().to_string());
    m.insert("schedule.total_iterations".into(), t.total_iterations().to_string());
    m.insert(
        "schedule.transition_consumed".into(),
        if t.n_coop == 0 { "0".into() } else { "pending".into() },
    );
    m.insert("status".into(), "running".into());
    m
}

struct Artifacts<'a> {
    setup: &'a RunSetup,
    out: &'a Path,
    sink: MetricsSink,
    manifest: BTreeMap<String, String>,
    snapshot_every: u64,
    checkpoint_every: u64,
}

impl Artifacts<'_> {
    fn write_manifest(&self) -> Result<()> {
        persistence::write_manifest(&self.out.join("manifest.txt"), &self.manifest)
    }

    fn snapshot(&self, state: &TrainerState, label: &str) -> Result<()> {
        let mut rng = rng::stream(rng::mix(self.setup.train.seed, state.consumed), 3);
        let generated = state.generator.sample(SNAPSHOT_POINTS, &mut rng)?;
        let real = self.setup.dataset.sample_batch(SNAPSHOT_POINTS, &mut rng)?;
        let centers = self.setup.dataset.mode_centers();
        let svg = Scatter {
            real: &real,
            generated: &generated,
            centers: &centers,
            title: format!("consumed {} ({label})", state.consumed),
        }
        .to_svg()?;
        let path = self
            .out
            .join("snapshots")
            .join(format!("snap_{:010}_{label}.svg", state.consumed));
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))
    }

    fn checkpoint(&self, state: &TrainerState, name: &str) -> Result<()> {
        persistence::save_checkpoint(self.setup, state, &self.out.join("checkpoints").join(name))
    }
}

fn crossed(prev: u64, now: u64, every: u64) -> bool {
    every > 0 && now / every > prev / every
}

impl RunObserver for Artifacts<'_> {
    fn on_iteration(&mut self, state: &TrainerState, prev: u64) -> Result<()> {
        if crossed(prev, state.consumed, self.snapshot_every) {
            // Label with the stage that produced this state.
            let label = if state.stage == Stage::Cooperative || state.consumed == state.coop_consumed {
                Stage::Cooperative
            } else {
                Stage::Adversarial
            };
            self.snapshot(state, label.as_str())?;
        }
        if crossed(prev, state.consumed, self.checkpoint_every) {
            self.checkpoint(state, &format!("ckpt_{:010}.bin", state.consumed))?;
        }
        Ok(())
    }

    fn on_transition(&mut self, state: &TrainerState) -> Result<()> {
        self.manifest.insert(
            "schedule.transition_consumed".into(),
            state.coop_consumed.to_string(),
        );
        self.write_manifest()?;
        self.snapshot(state, "transition")
    }

    fn on_record(&mut self, _state: &TrainerState, record: &RunRecord) -> Result<()> {
        self.sink.append_record(record)
    }
}

/// Trains `cfg` into `opts.out`, writing every run artifact.
pub fn run_to_dir(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut setup = cfg.resolve()?;
    setup.train.record_wall_ms = opts.record_wall_ms;
    prepare_out_dir(&opts.out, opts.force)?;
    if let Ok(text) = toml::to_string(cfg) {
        let path = opts.out.join("config.toml");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let mut artifacts = Artifacts {
        setup: &setup,
        out: &opts.out,
        sink: MetricsSink::create(&opts.out.join("metrics.csv"))?,
        manifest: manifest_entries(cfg, &setup, opts),
        snapshot_every: opts.snapshot_every.unwrap_or(setup.train.eval_every),
        checkpoint_every: cfg.schedule.checkpoint_every,
    };
    artifacts.write_manifest()?;
    let initial = TrainerState::new(&setup)?;
    artifacts.snapshot(&initial, "init")?;
    match trainer::resume(&setup, initial, &mut artifacts) {
        Ok(outcome) => {
            artifacts.checkpoint(&outcome.state, "final.bin")?;
            artifacts.manifest.insert("status".into(), "completed".into());
            artifacts.write_manifest()?;
            Ok(outcome)
        }
        Err(e) => {
            artifacts.manifest.insert("status".into(), "failed".into());
            artifacts.manifest.insert("failure".into(), e.to_string());
            artifacts.write_manifest()?;
            Err(e)
        }
    }
}

/// Final and best metrics of one run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub seed: u64,
    pub final_consumed: u64,
    pub final_modes_covered: usize,
    pub best_modes_covered: usize,
    pub final_hq_fraction: f64,
    pub best_hq_fraction: f64,
    pub final_energy_distance: f64,
    pub best_energy_distance: f64,
    /// Config entries without the seed; runs with equal keys form a group.
    pub config_key: BTreeMap<String, String>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = persistence::read_manifest(&dir.join("manifest.txt"))?;
        let records = persistence::read_records(&dir.join("metrics.csv"))?;
        let last = records.last().ok_or_else(|| {
            Error::Format(format!("{} has no metric rows", dir.display()))
        })?;
        let seed = manifest
            .get("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{}: manifest lacks a seed", dir.display())))?;
        let config_key = manifest
            .iter()
            .filter(|(k, _)| k.starts_with("config.") && k.as_str() != "config.seed")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(Self {
            dir: dir.to_owned(),
            seed,
            final_consumed: last.consumed,
            final_modes_covered: last.modes_covered,
            best_modes_covered: records.iter().map(|r| r.modes_covered).max().unwrap_or(0),
            final_hq_fraction: last.hq_fraction,
            best_hq_fraction: records.iter().map(|r| r.hq_fraction).fold(f64::MIN, f64::max),
            final_energy_distance: last.energy_distance,
            best_energy_distance: records
                .iter()
                .map(|r| r.energy_distance)
                .fold(f64::INFINITY, f64::min),
            config_key,
        })
    }

    fn dataset(&self) -> BTreeMap<&String, &String> {
        self.config_key
            .iter()
            .filter(|(k, _)| k.starts_with("config.dataset."))
            .collect()
    }
}

/// Means of the final metrics over runs that differ only in seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    /// Config entries that distinguish this group from the others, or `all`.
    pub label: String,
    pub seeds: Vec<u64>,
    pub mean_final_modes_covered: f64,
    pub mean_final_hq_fraction: f64,
    pub mean_final_energy_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub runs: Vec<RunSummary>,
    pub groups: Vec<GroupSummary>,
}

/// Columns of the per-run CSV. Deltas are final values minus those of the
/// first run.
pub const COMPARE_COLUMNS: [&str; 13] = [
    "run",
    "seed",
    "final_consumed",
    "final_modes_covered",
    "best_modes_covered",
    "final_hq_fraction",
    "best_hq_fraction",
    "final_energy_distance",
    "best_energy_distance",
    "delta_modes_covered",
    "delta_hq_fraction",
    "delta_energy_distance",
    "group",
];

/// Columns of the group CSV.
pub const GROUP_COLUMNS: [&str; 6] = [
    "group",
    "n_runs",
    "seeds",
    "mean_final_modes_covered",
    "mean_final_hq_fraction",
    "mean_final_energy_distance",
];

pub fn compare_runs(dirs: &[PathBuf]) -> Result<CompareReport> {
    if dirs.len() < 2 {
        return Err(Error::config("runs", "compare needs at least two run directories"));
    }
    let runs = dirs
        .iter()
        .map(|d| RunSummary::load(d))
        .collect::<Result<Vec<_>>>()?;
    for r in &runs[1..] {
        if r.dataset() != runs[0].dataset() {
            return Err(Error::config(
                "dataset",
                format!(
                    "{} and {} were trained on different datasets",
                    runs[0].dir.display(),
                    r.dir.display()
                ),
            ));
        }
    }
    // Keys whose values are not shared by every run.
    let varying: Vec<&String> = runs[0]
        .config_key
        .keys()
        .chain(runs.iter().flat_map(|r| r.config_key.keys()))
        .filter(|k| {
            let first = runs[0].config_key.get(*k);
            runs.iter().any(|r| r.config_key.get(*k) != first)
        })
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut groups: Vec<(BTreeMap<String, String>, Vec<&RunSummary>)> = Vec::new();
    for r in &runs {
        match groups.iter_mut().find(|(k, _)| *k == r.config_key) {
            Some((_, members)) => members.push(r),
            None => groups.push((r.config_key.clone(), vec![r])),
        }
    }
    let groups = groups
        .into_iter()
        .map(|(key, members)| {
            let label = varying
                .iter()
                .map(|k| {
                    let v = key.get(*k).map_or("-", String::as_str);
                    format!("{}={v}", k.trim_start_matches("config."))
                })
                .collect::<Vec<_>>()
                .join(" ");
            let n = members.len() as f64;
            let mean = |f: &dyn Fn(&RunSummary) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            GroupSummary {
                label: if label.is_empty() { "all".into() } else { label },
                seeds: members.iter().map(|r| r.seed).collect(),
                mean_final_modes_covered: mean(&|r| r.final_modes_covered as f64),
                mean_final_hq_fraction: mean(&|r| r.final_hq_fraction),
                mean_final_energy_distance: mean(&|r| r.final_energy_distance),
            }
        })
        .collect();
    Ok(CompareReport { runs, groups })
}

impl CompareReport {
    fn group_of(&self, run: &RunSummary) -> usize {
        let mut keys: Vec<&BTreeMap<String, String>> = Vec::new();
        for r in &self.runs {
            if !keys.contains(&&r.config_key) {
                keys.push(&r.config_key);
            }
        }
        keys.iter().position(|k| **k == run.config_key).unwrap_or(0)
    }

    fn run_rows(&self) -> Vec<Vec<String>> {
        let base = &self.runs[0];
        self.runs
            .iter()
            .map(|r| {
                vec![
                    r.dir.display().to_string(),
                    r.seed.to_string(),
                    r.final_consumed.to_string(),
                    r.final_modes_covered.to_string(),
                    r.best_modes_covered.to_string(),
                    persistence::format_sig9(r.final_hq_fraction),
                    persistence::format_sig9(r.best_hq_fraction),
                    persistence::format_sig9(r.final_energy_distance),
                    persistence::format_sig9(r.best_energy_distance),
                    (r.final_modes_covered as i64 - base.final_modes_covered as i64).to_string(),
                    persistence::format_sig9(r.final_hq_fraction - base.final_hq_fraction),
                    persistence::format_sig9(r.final_energy_distance - base.final_energy_distance),
                    self.group_of(r).to_string(),
                ]
            })
            .collect()
    }

    fn group_rows(&self) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|g| {
                vec![
                    g.label.clone(),
                    g.seeds.len().to_string(),
                    g.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
                    persistence::format_sig9(g.mean_final_modes_covered),
                    persistence::format_sig9(g.mean_final_hq_fraction),
                    persistence::format_sig9(g.mean_final_energy_distance),
                ]
            })
            .collect()
    }

    /// Writes the per-run table to `path` and the group table next to it.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(COMPARE_COLUMNS)?;
        for row in self.run_rows() {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let gpath = groups_path(path);
        let mut w = csv::Writer::from_path(&gpath)?;
        w.write_record(GROUP_COLUMNS)?;
        for row in self.group_rows() {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(&gpath, e))
    }

    /// Plain-text rendering of both tables.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<40} {:>6} {:>10} {:>6} {:>6} {:>8} {:>10} {:>7}",
            "run", "seed", "consumed", "modes", "best", "hq", "energy", "d_modes"
        );
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:<40} {:>6} {:>10} {:>6} {:>6} {:>8.4} {:>10.4e} {:>+7}",
                r.dir.display(),
                r.seed,
                r.final_consumed,
                r.final_modes_covered,
                r.best_modes_covered,
                r.final_hq_fraction,
                r.final_energy_distance,
                r.final_modes_covered as i64 - self.runs[0].final_modes_covered as i64
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>6} {:>10} {:>8} {:>10}  group", "runs", "modes", "hq", "energy");
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{:>6} {:>10.3} {:>8.4} {:>10.4e}  {}",
                g.seeds.len(),
                g.mean_final_modes_covered,
                g.mean_final_hq_fraction,
                g.mean_final_energy_distance,
                g.label
            );
        }
        s
    }
}

pub fn groups_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or("summary".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.groups.csv"))
}

pub fn compare_command(args: &CompareArgs) -> Result<CompareReport> {
    let report = compare_runs(&args.runs)?;
    if let Some(out) = &args.out {
        report.write_csv(out)?;
    }
    Ok(report)
}

/// Outcome of one grid point of a sweep.
#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    pub seed: u64,
    pub dir: PathBuf,
    pub result: Result<()>,
}

/// Runs every `(value, seed)` pair, at most `jobs` at a time, and keeps
/// going past failures.
pub fn sweep_runs(base: &RunConfig, args: &SweepArgs) -> Result<Vec<SweepRun>> {
    let mut grid = Vec::new();
    for &value in &args.values {
        for &seed in &args.seeds {
            let mut cfg = base.clone();
            args.axis.apply(&mut cfg, value)?;
            cfg.seed = seed;
            // Surface config errors before anything starts.
            cfg.resolve()?;
            let dir = args
                .out
                .join(format!("{}={value}", args.axis.name()))
                .join(format!("seed={seed}"));
            grid.push((value, seed, cfg, dir));
        }
    }
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    let force = args.overrides.force;
    let record_wall_ms = args.overrides.record_wall_ms;
    let config_path = args.overrides.config.clone();
    let snapshot_every = args.snapshot_every;
    Ok(pool.install(|| {
        grid.into_par_iter()
            .map(|(value, seed, cfg, dir)| {
                let opts = RunOptions {
                    out: dir.clone(),
                    snapshot_every,
                    force,
                    record_wall_ms,
                    config_path: config_path.clone(),
                };
                let result = run_to_dir(&cfg, &opts).map(|_| ());
                SweepRun {
                    value,
                    seed,
                    dir,
                    result,
                }
            })
            .collect()
    }))
}

pub fn sweep_command(args: &SweepArgs) -> Result<i32> {
    let base = args.overrides.load()?;
    prepare_sweep_dir(&args.out, args.overrides.force)?;
    let runs = sweep_runs(&base, args)?;
    let mut failures = String::new();
    for r in &runs {
        match &r.result {
            Ok(()) => println!("ok     {}", r.dir.display()),
            Err(e) => {
                println!("failed {}: {e}", r.dir.display());
                let _ = writeln!(failures, "{}\t{e}", r.dir.display());
            }
        }
    }
    let path = args.out.join("failures.txt");
    fs::write(&path, &failures).map_err(|e| Error::io(&path, e))?;
    let done: Vec<PathBuf> = runs
        .iter()
        .filter(|r| r.result.is_ok())
        .map(|r| r.dir.clone())
        .collect();
    if done.len() >= 2 {
        let report = compare_runs(&done)?;
        report.write_csv(&args.out.join("summary.csv"))?;
        print!("{}", report.render());
    }
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_RUN_FAILURE })
}

fn prepare_sweep_dir(out: &Path, force: bool) -> Result<()> {
    if out.exists()
        && !force
        && fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_some()
    {
        return Err(Error::config(
            "--out",
            format!("{} is not empty (use --force to write into it)", out.display()),
        ));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}
