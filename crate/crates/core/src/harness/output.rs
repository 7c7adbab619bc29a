use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{BoundKind, EstimatorKind, ExperimentConfig};
use super::metrics::{PointSummary, Stage, TraceRow};
use super::run::{MaskDemo, TrialResult};
use crate::error::Result;

/// Version tag written into every JSON sidecar.
pub const SCHEMA_VERSION: u32 = 1;

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn k_cell(k: Option<f64>) -> String {
    opt(k)
}

/// Per-trial rows. Units are part of the column names: `_m`, `_m2`, `_db`.
pub fn trial_header(estimators: &[EstimatorKind], bounds: bool) -> Vec<String> {
    let mut h: Vec<String> =
        ["snr_db", "p_fail", "distance_m", "k_factor", "trial", "mask_draw", "seed", "num_failures"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    if bounds {
        for c in ["crb_perfect_m2", "crb_knownloc_m2", "lb_m2", "pseudo_true_bias_m", "stationary", "bound_error"] {
            h.push(c.into());
        }
    }
    for e in estimators {
        for c in ["px_m", "py_m", "pz_m", "sq_err_m2", "mask_nmse", "detected", "iterations", "error"] {
            h.push(format!("{}_{c}", e.name()));
        }
    }
    h
}

pub fn write_trials_csv(path: &Path, config: &ExperimentConfig, results: &[TrialResult]) -> Result<()> {
    let with_bounds = !config.bounds.is_empty();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trial_header(&config.estimators, with_bounds))?;
    for r in results {
        let mut row = vec![
            num(r.point.snr_db),
            num(r.point.p_fail),
            num(r.ue_distance),
            k_cell(r.point.k_factor),
            r.trial.to_string(),
            r.mask_draw.to_string(),
            r.seed.to_string(),
            r.num_failures.to_string(),
        ];
        if with_bounds {
            let b = &r.bounds;
            row.extend([
                opt(b.crb_perfect),
                opt(b.crb_knownloc),
                opt(b.lb),
                opt(b.pseudo_true_bias),
                b.stationary.map(|s| s.to_string()).unwrap_or_default(),
                b.error.clone().unwrap_or_default(),
            ]);
        }
        for &kind in &config.estimators {
            match r.estimate(kind) {
                Some(Ok(o)) => row.extend([
                    num(o.p_hat.x),
                    num(o.p_hat.y),
                    num(o.p_hat.z),
                    num(o.position_sq_error),
                    num(o.mask_nmse),
                    o.num_detected.to_string(),
                    o.iterations.to_string(),
                    String::new(),
                ]),
                Some(Err(e)) => {
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push(e.clone());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 8)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_header(estimators: &[EstimatorKind]) -> Vec<String> {
    let mut h: Vec<String> = [
        "snr_db",
        "p_fail",
        "distance_m",
        "k_factor",
        "trials",
        "mean_failures",
        "crb_perfect_rmse_m",
        "crb_knownloc_rmse_m",
        "lb_rmse_m",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for e in estimators {
        for c in ["rmse_m", "mask_nmse", "mean_detected", "failed_trials"] {
            h.push(format!("{}_{c}", e.name()));
        }
    }
    h
}

pub fn write_summary_csv(path: &Path, estimators: &[EstimatorKind], rows: &[PointSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header(estimators))?;
    for s in rows {
        let mut row = vec![
            num(s.point.snr_db),
            num(s.point.p_fail),
            num(s.ue_distance),
            k_cell(s.point.k_factor),
            s.trials.to_string(),
            num(s.mean_failures),
            opt(s.crb_perfect),
            opt(s.crb_knownloc),
            opt(s.lb),
        ];
        for &kind in estimators {
            match s.estimators.iter().find(|e| e.estimator == kind) {
                Some(e) => row.extend([opt(e.rmse), opt(e.nmse), opt(e.mean_detected), e.failed_trials.to_string()]),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub const TRACE_HEADER: [&str; 9] =
    ["snr_db", "p_fail", "distance_m", "k_factor", "estimator", "iteration", "rmse_m", "mask_nmse", "trials"];

/// Convergence rows; the `iteration` column holds `final` for the refined output.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow], distance_of: impl Fn(&TraceRow) -> f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        let stage = match r.stage {
            Stage::Iteration(i) => i.to_string(),
            Stage::Final => "final".into(),
        };
        w.write_record([
            num(r.point.snr_db),
            num(r.point.p_fail),
            num(distance_of(r)),
            k_cell(r.point.k_factor),
            r.estimator.name().into(),
            stage,
            num(r.rmse),
            num(r.nmse),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per element: grid position, true mask, and each estimate.
pub fn write_mask_csv(path: &Path, demo: &MaskDemo) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> =
        ["element", "row", "col", "failed", "true_re", "true_im"].iter().map(|s| s.to_string()).collect();
    for (k, _) in &demo.estimates {
        for c in ["re", "im", "flagged", "error"] {
            header.push(format!("{}_{c}", k.name()));
        }
    }
    w.write_record(&header)?;
    let cols = demo.scenario.grid_shape.map_or(demo.truth.len(), |(_, c)| c);
    for n in 0..demo.truth.len() {
        let m = demo.truth.mask[n];
        let mut row = vec![
            n.to_string(),
            (n / cols).to_string(),
            (n % cols).to_string(),
            demo.truth.failed[n].to_string(),
            num(m.re),
            num(m.im),
        ];
        for (_, est) in &demo.estimates {
            match est {
                Ok(e) => row.extend([
                    num(e.m_hat[n].re),
                    num(e.m_hat[n].im),
                    e.failing_set.contains(&n).to_string(),
                    String::new(),
                ]),
                Err(msg) => row.extend([String::new(), String::new(), String::new(), msg.clone()]),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar echoing the resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a> {
    pub schema_version: u32,
    pub crate_version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub bounds: Vec<&'static str>,
    pub estimators: Vec<&'static str>,
    pub files: Vec<String>,
}

pub fn write_sidecar(path: &Path, command: &str, config: &ExperimentConfig, files: &[PathBuf]) -> Result<()> {
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION"),
        command,
        seed: config.seed,
        config,
        bounds: config.bounds.iter().map(|b: &BoundKind| b.name()).collect(),
        estimators: config.estimators.iter().map(|e| e.name()).collect(),
        files: files
            .iter()
            .map(|f| f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    let text = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
