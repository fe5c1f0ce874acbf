//! cgbench: instance generation, training-data collection, classifier
//! training, and strategy benchmarking for the column-generation solver.
//!
//! Every subcommand is also callable in-process (see [`commands`]), which is
//! how the integration tests drive the pipeline without spawning binaries.

pub mod commands;
pub mod csvio;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use cg_core::cg::{parse_levels, CgConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cgbench",
    version,
    about = "Column-generation VRPTW benchmark pipeline with learned arc selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded random instances in Solomon layout.
    Gen(GenArgs),
    /// Solve instances to optimality and label the arcs columns used.
    Collect(CollectArgs),
    /// Train an arc classifier on a collected dataset.
    Train(TrainArgs),
    /// Solve one instance with a chosen strategy.
    Solve(SolveArgs),
    /// Cross instances with strategies and emit a comparison report.
    Bench(BenchArgs),
    /// Pretty-print a bench report and check its exactness invariant.
    Report(ReportArgs),
}

/// Flags shared by the solving commands; a value wins over the config file,
/// which wins over the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// Root RNG seed; every random draw derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML settings file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Leave the reduced network below this many columns per iteration.
    #[arg(long)]
    pub eta_min: Option<usize>,
    /// Re-enter the reduced network at this many columns per iteration.
    #[arg(long)]
    pub eta_max: Option<usize>,
    /// Make the reduced network's first failure permanent.
    #[arg(long)]
    pub disable_reduced_after_first_failure: Option<bool>,
    /// Per-node reduced-cost budgets, e.g. "10,20,inf".
    #[arg(long)]
    pub redcost_levels: Option<String>,
    /// Column cap per pricing call.
    #[arg(long)]
    pub max_columns: Option<usize>,
    /// Window tightening factor in (0, 1]; omit to leave windows unchanged.
    #[arg(long)]
    pub tighten: Option<f64>,
    /// Selectable-arc fraction kept by random_s / cost_s without a model.
    #[arg(long)]
    pub keep_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Classifier kind: forest or logistic.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Features drawn per split.
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    #[arg(long)]
    pub min_samples_split: Option<usize>,
    /// Inverse L2 regularization strength (logistic).
    #[arg(long)]
    pub c: Option<f64>,
    /// Fraction of instances held out for evaluation.
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// How many instances to write.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub customers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spatial pattern: random, clustered, or mixed.
    #[arg(long, default_value = "random")]
    pub layout: String,
    /// Window tightening factor applied before writing.
    #[arg(long)]
    pub tighten: Option<f64>,
    /// Smallest customer demand (default 5).
    #[arg(long)]
    pub demand_min: Option<u32>,
    /// Largest customer demand (default 40).
    #[arg(long)]
    pub demand_max: Option<u32>,
    /// Vehicle capacity (default 200).
    #[arg(long)]
    pub capacity: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Instance files to solve and label.
    pub instances: Vec<PathBuf>,
    /// Dataset file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: SolverFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// baseline, ml_s, random_s, cost_s, redcost_s, or ml_redcost_s.
    #[arg(long)]
    pub strategy: String,
    /// Trained model file (required by ml_s and ml_redcost_s).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write a single-row report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-iteration trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Omit timing columns from written files.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Instance files; each is paired with every strategy.
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    /// Comma list of strategies; baseline is always included.
    #[arg(long, default_value = "baseline")]
    pub strategies: String,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-cell trace CSVs.
    #[arg(long)]
    pub traces_dir: Option<PathBuf>,
    /// Worker threads for independent (instance, strategy) cells.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Omit timing and gain columns for byte-reproducible reports.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report CSV produced by bench or solve.
    #[arg(long)]
    pub input: PathBuf,
    /// Objective agreement tolerance between strategies and baseline.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// The TOML settings file: any subset of these keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub eta_min: Option<usize>,
    pub eta_max: Option<usize>,
    pub disable_reduced_after_first_failure: Option<bool>,
    pub redcost_levels: Option<String>,
    pub max_columns: Option<usize>,
    pub keep_fraction: Option<f64>,
    pub tighten: Option<f64>,
    pub threads: Option<usize>,
    pub train: Option<FileTrain>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileTrain {
    pub kind: Option<String>,
    pub trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub max_features: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub c: Option<f64>,
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKindArg {
    Logistic,
    Forest,
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub kind: ModelKindArg,
    pub trees: usize,
    pub max_depth: usize,
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub c: f64,
    pub test_fraction: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            kind: ModelKindArg::Forest,
            trees: 500,
            max_depth: 5,
            max_features: 5,
            min_samples_leaf: 50,
            min_samples_split: 100,
            c: 1.0,
            test_fraction: 0.2,
        }
    }
}

/// Everything a command needs after flags, config file, and defaults merge.
#[derive(Debug, Clone)]
pub struct Settings {
    pub cg: CgConfig,
    pub tighten: Option<f64>,
    pub threads: usize,
    pub train: TrainSettings,
}

pub fn resolve_settings(flags: &SolverFlags, train_flags: Option<&TrainFlags>) -> Result<Settings> {
    let file: FileConfig = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let defaults = CgConfig::default();
    let levels = match flags.redcost_levels.as_deref().or(file.redcost_levels.as_deref()) {
        Some(text) => parse_levels(text)?,
        None => defaults.redcost_levels.clone(),
    };
    let cg = CgConfig {
        strategy: defaults.strategy,
        eta_min: flags.eta_min.or(file.eta_min).unwrap_or(defaults.eta_min),
        eta_max: flags.eta_max.or(file.eta_max).unwrap_or(defaults.eta_max),
        disable_reduced_after_first_failure: flags
            .disable_reduced_after_first_failure
            .or(file.disable_reduced_after_first_failure)
            .unwrap_or(defaults.disable_reduced_after_first_failure),
        redcost_levels: levels,
        max_columns_per_iter: flags
            .max_columns
            .or(file.max_columns)
            .unwrap_or(defaults.max_columns_per_iter),
        rng_seed: flags.seed.or(file.seed).unwrap_or(defaults.rng_seed),
        keep_fraction: flags
            .keep_fraction
            .or(file.keep_fraction)
            .unwrap_or(defaults.keep_fraction),
    };
    cg.validate()?;

    let tighten = flags.tighten.or(file.tighten);
    if let Some(f) = tighten {
        if !(f > 0.0 && f <= 1.0) {
            bail!("tighten factor {f} outside (0, 1]");
        }
    }

    let ft = file.train.unwrap_or_default();
    let tf = train_flags.cloned().unwrap_or_default();
    let td = TrainSettings::default();
    let kind = match tf.kind.as_deref().or(ft.kind.as_deref()) {
        None => td.kind,
        Some("forest") => ModelKindArg::Forest,
        Some("logistic") => ModelKindArg::Logistic,
        Some(other) => bail!("unknown model kind {other:?} (forest|logistic)"),
    };
    let train = TrainSettings {
        kind,
        trees: tf.trees.or(ft.trees).unwrap_or(td.trees),
        max_depth: tf.max_depth.or(ft.max_depth).unwrap_or(td.max_depth),
        max_features: tf.max_features.or(ft.max_features).unwrap_or(td.max_features),
        min_samples_leaf: tf
            .min_samples_leaf
            .or(ft.min_samples_leaf)
            .unwrap_or(td.min_samples_leaf),
        min_samples_split: tf
            .min_samples_split
            .or(ft.min_samples_split)
            .unwrap_or(td.min_samples_split),
        c: tf.c.or(ft.c).unwrap_or(td.c),
        test_fraction: tf.test_fraction.or(ft.test_fraction).unwrap_or(td.test_fraction),
    };
    if !(train.test_fraction > 0.0 && train.test_fraction < 1.0) {
        bail!("test_fraction {} outside (0, 1)", train.test_fraction);
    }

    Ok(Settings {
        cg,
        tighten,
        threads: file.threads.unwrap_or(1),
        train,
    })
}

/// Parses and dispatches; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::cmd_gen(&a).map(|_| 0),
        Command::Collect(a) => commands::cmd_collect(&a).map(|s| i32::from(s.partial)),
        Command::Train(a) => commands::cmd_train(&a).map(|_| 0),
        Command::Solve(a) => commands::cmd_solve(&a).map(|_| 0),
        Command::Bench(a) => commands::cmd_bench(&a).map(|r| i32::from(r.failed_cells > 0)),
        Command::Report(a) => commands::cmd_report(&a).map(|ok| i32::from(!ok)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
