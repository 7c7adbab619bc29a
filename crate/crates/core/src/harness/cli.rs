//! `risloc` command line.
//!
//! Each subcommand starts from its own default experiment, or from the file
//! given by `--config`, then applies the flag overrides.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{BoundKind, EstimatorKind, ExperimentConfig, MaskMode, Preset, SweepConfig};
use super::metrics::{metrics, trace_metrics};
use super::output::{write_mask_csv, write_sidecar, write_summary_csv, write_trace_csv, write_trials_csv};
use super::run::{mask_demo, run_sweep};
use crate::error::{Error, Result};
use crate::estimators::GridSpec;

#[derive(Debug, Parser)]
#[command(name = "risloc", version, about = "Near-field RIS localization under pixel failures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CRB / misspecified bound sweep over SNR and p_fail.
    Bounds(Common),
    /// Estimator RMSE and mask NMSE sweep.
    Run(Common),
    /// Per-iteration convergence of the joint estimators.
    Trace(Common),
    /// True and estimated masks of one trial.
    MaskDemo {
        #[command(flatten)]
        common: Common,
        /// Trial index to dump.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Estimator sweep over the Rician factor of the RIS-UE link.
    Rician(Common),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskModeArg {
    Bernoulli,
    FixedFraction,
    FixedCount,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file; replaces the subcommand defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (default: $RISLOC_OUTPUT_DIR, else ./risloc-out).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    preset: Option<PresetArg>,
    /// SNR axis, dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pfail: Vec<f64>,
    /// UE range axis, m.
    #[arg(long, value_delimiter = ',')]
    distance: Vec<f64>,
    #[arg(long = "k-factor", value_delimiter = ',')]
    k_factor: Vec<f64>,
    /// Comma list of agnostic, l1, successive.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Comma list of crb_perfect, crb_knownloc, lb; `none` disables bounds.
    #[arg(long, value_delimiter = ',')]
    bounds: Vec<String>,
    #[arg(long = "mask-mode")]
    mask_mode: Option<MaskModeArg>,
    /// Exact failure count; implies fixed-count masks.
    #[arg(long)]
    failures: Option<usize>,
    #[arg(long = "mask-draws")]
    mask_draws: Option<usize>,
    /// Grid points per angle axis.
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    #[arg(long)]
    noiseless: bool,
}

fn all_bounds() -> Vec<BoundKind> {
    vec![BoundKind::CrbPerfect, BoundKind::CrbKnownloc, BoundKind::Lb]
}

fn all_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Agnostic, EstimatorKind::L1, EstimatorKind::Successive]
}

/// Defaults of each subcommand when no `--config` is given.
fn command_defaults(name: &str) -> ExperimentConfig {
    let base = ExperimentConfig::default();
    match name {
        "bounds" => ExperimentConfig {
            trials: 100,
            estimators: Vec::new(),
            bounds: all_bounds(),
            masks: MaskMode::Bernoulli,
            sweep: SweepConfig {
                snr_db: vec![0.0, 10.0, 20.0, 30.0],
                p_fail: vec![0.0, 0.02, 0.05],
                ..SweepConfig::default()
            },
            ..base
        },
        "run" => ExperimentConfig {
            bounds: vec![BoundKind::CrbKnownloc, BoundKind::Lb],
            sweep: SweepConfig { snr_db: vec![0.0, 10.0, 20.0, 30.0], p_fail: vec![0.02], ..SweepConfig::default() },
            ..base
        },
        "trace" => ExperimentConfig {
            trials: 100,
            mask_draws: 100,
            estimators: vec![EstimatorKind::L1, EstimatorKind::Successive],
            masks: MaskMode::FixedCount { count: 3 },
            sweep: SweepConfig { snr_db: vec![20.0], p_fail: vec![3.0 / 64.0], ..SweepConfig::default() },
            ..base
        },
        "mask-demo" => ExperimentConfig {
            trials: 1,
            estimators: vec![EstimatorKind::L1, EstimatorKind::Successive],
            sweep: SweepConfig { snr_db: vec![20.0], p_fail: vec![0.05], ..SweepConfig::default() },
            ..base
        },
        _ => ExperimentConfig {
            trials: 100,
            estimators: all_estimators(),
            sweep: SweepConfig {
                snr_db: vec![20.0],
                p_fail: vec![0.02],
                k_factor: vec![0.0, 1.0, 10.0, 100.0, 1000.0],
                ..SweepConfig::default()
            },
            ..base
        },
    }
}

fn resolve(name: &str, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
            other => other,
        })?,
        None => command_defaults(name),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(o) = &c.output {
        cfg.output = Some(o.clone());
    }
    if let Some(p) = c.preset {
        cfg.scenario.preset = match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        };
    }
    if !c.snr.is_empty() {
        cfg.sweep.snr_db = c.snr.clone();
    }
    if !c.pfail.is_empty() {
        cfg.sweep.p_fail = c.pfail.clone();
    }
    if !c.distance.is_empty() {
        cfg.sweep.distance = c.distance.clone();
    }
    if !c.k_factor.is_empty() {
        cfg.sweep.k_factor = c.k_factor.clone();
    }
    if !c.estimators.is_empty() {
        cfg.estimators = c.estimators.iter().map(|s| EstimatorKind::parse(s)).collect::<Result<_>>()?;
    }
    if !c.bounds.is_empty() {
        cfg.bounds = if c.bounds.iter().any(|b| b == "none") {
            Vec::new()
        } else {
            c.bounds.iter().map(|s| BoundKind::parse(s)).collect::<Result<_>>()?
        };
    }
    match (c.mask_mode, c.failures) {
        (Some(MaskModeArg::Bernoulli), None) => cfg.masks = MaskMode::Bernoulli,
        (Some(MaskModeArg::FixedFraction), None) => cfg.masks = MaskMode::FixedFraction,
        (Some(MaskModeArg::FixedCount), None) => {
            return Err(Error::Config("--mask-mode fixed-count needs --failures".into()));
        }
        (None | Some(MaskModeArg::FixedCount), Some(count)) => cfg.masks = MaskMode::FixedCount { count },
        (Some(_), Some(_)) => return Err(Error::Config("--failures conflicts with --mask-mode".into())),
        (None, None) => {}
    }
    if let Some(d) = c.mask_draws {
        cfg.mask_draws = d;
    }
    if let Some(k) = c.grid_points {
        cfg.grid = Some(GridSpec { points_per_axis: k, ..cfg.grid() });
    }
    if c.noiseless {
        cfg.noiseless = true;
    }
    if name == "bounds" {
        // Every bound trial is its own failure profile.
        cfg.mask_draws = cfg.trials;
        cfg.estimators.clear();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep_files(name: &str, cfg: &ExperimentConfig, dir: &Path, with_trace: bool) -> Result<Vec<PathBuf>> {
    let results = run_sweep(cfg)?;
    let trials = dir.join(format!("{name}_trials.csv"));
    write_trials_csv(&trials, cfg, &results)?;
    let summary = dir.join(format!("{name}.csv"));
    write_summary_csv(&summary, &cfg.estimators, &metrics(&results))?;
    let mut files = vec![trials, summary];
    if with_trace {
        let trace = dir.join(format!("{name}_iterations.csv"));
        write_trace_csv(&trace, &trace_metrics(&results), |r| cfg.scenario.ue_distance(r.point.distance))?;
        files.push(trace);
    }
    Ok(files)
}

fn execute(command: Command) -> Result<Vec<PathBuf>> {
    let (name, common, trial) = match &command {
        Command::Bounds(c) => ("bounds", c, None),
        Command::Run(c) => ("run", c, None),
        Command::Trace(c) => ("trace", c, None),
        Command::MaskDemo { common, trial } => ("mask-demo", common, Some(*trial)),
        Command::Rician(c) => ("rician", c, None),
    };
    let cfg = resolve(name, common)?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let stem = name.replace('-', "_");
    let mut files = match trial {
        Some(t) => {
            let point = cfg.axis_points()[0];
            let path = dir.join(format!("{stem}.csv"));
            write_mask_csv(&path, &mask_demo(&cfg, &point, t)?)?;
            vec![path]
        }
        None => sweep_files(&stem, &cfg, &dir, name == "trace")?,
    };
    let sidecar = dir.join(format!("{stem}.json"));
    write_sidecar(&sidecar, name, &cfg, &files)?;
    files.push(sidecar);
    Ok(files)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status: 0 on success, 2 on usage or config errors, 1 on
/// other failures.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(args) {
        Ok(p) => p,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(parsed.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("risloc: {e}");
            2
        }
        Err(e) => {
            eprintln!("risloc: {e}");
            1
        }
    }
}
