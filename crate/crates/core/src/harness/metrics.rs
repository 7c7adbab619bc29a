use serde::{Deserialize, Serialize};

use super::config::{AxisPoint, EstimatorKind};
use super::run::{group_by_point, TrialResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    /// m; `None` when every trial failed
    pub rmse: Option<f64>,
    pub nmse: Option<f64>,
    pub mean_detected: Option<f64>,
    pub failed_trials: usize,
}

/// Ensemble statistics of one axis point. Bounds are RMSE-scale (m):
/// square roots of the trial-averaged m² values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: AxisPoint,
    /// m
    pub ue_distance: f64,
    pub trials: usize,
    pub mean_failures: f64,
    pub crb_perfect: Option<f64>,
    pub crb_knownloc: Option<f64>,
    pub lb: Option<f64>,
    pub estimators: Vec<EstimatorSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// RMSE-scale bound: `sqrt(mean)` over trials that produced a value.
fn bound_rmse(trials: &[&TrialResult], get: impl Fn(&TrialResult) -> Option<f64>) -> Option<f64> {
    mean(trials.iter().filter_map(|t| get(t))).map(f64::sqrt)
}

fn kinds_in(trials: &[&TrialResult]) -> Vec<EstimatorKind> {
    let mut kinds: Vec<EstimatorKind> = Vec::new();
    for t in trials {
        for e in &t.estimates {
            if !kinds.contains(&e.estimator) {
                kinds.push(e.estimator);
            }
        }
    }
    kinds
}

/// Per-point RMSE, mask NMSE and mean detected-set size, plus bounds.
pub fn metrics(results: &[TrialResult]) -> Vec<PointSummary> {
    group_by_point(results)
        .into_iter()
        .map(|(point, trials)| {
            let estimators = kinds_in(&trials)
                .into_iter()
                .map(|kind| {
                    let ok: Vec<_> = trials.iter().filter_map(|t| t.estimate(kind)?.as_ref().ok()).collect();
                    let failed = trials.iter().filter(|t| matches!(t.estimate(kind), Some(Err(_)))).count();
                    EstimatorSummary {
                        estimator: kind,
                        rmse: mean(ok.iter().map(|o| o.position_sq_error)).map(f64::sqrt),
                        nmse: mean(ok.iter().map(|o| o.mask_nmse)),
                        mean_detected: mean(ok.iter().map(|o| o.num_detected as f64)),
                        failed_trials: failed,
                    }
                })
                .collect();
            PointSummary {
                point,
                ue_distance: trials[0].ue_distance,
                trials: trials.len(),
                mean_failures: mean(trials.iter().map(|t| t.num_failures as f64)).unwrap_or(0.0),
                crb_perfect: bound_rmse(&trials, |t| t.bounds.crb_perfect),
                crb_knownloc: bound_rmse(&trials, |t| t.bounds.crb_knownloc),
                lb: bound_rmse(&trials, |t| t.bounds.lb),
                estimators,
            }
        })
        .collect()
}

/// Stage of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Iteration(usize),
    /// Output after the final refinement.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub point: AxisPoint,
    pub estimator: EstimatorKind,
    pub stage: Stage,
    /// m
    pub rmse: f64,
    pub nmse: f64,
    pub trials: usize,
}

/// Ensemble RMSE and NMSE per iteration. Trials that stopped early carry
/// their last iterate forward, so every stage averages the same trials.
pub fn trace_metrics(results: &[TrialResult]) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for (point, trials) in group_by_point(results) {
        for kind in kinds_in(&trials) {
            let ok: Vec<_> = trials.iter().filter_map(|t| t.estimate(kind)?.as_ref().ok()).collect();
            if ok.is_empty() {
                continue;
            }
            let stages = ok.iter().map(|o| o.trace_sq_errors.len()).max().unwrap_or(0);
            let at = |v: &[f64], i: usize| v.get(i).or(v.last()).copied().unwrap_or(f64::NAN);
            for i in 0..stages {
                rows.push(TraceRow {
                    point,
                    estimator: kind,
                    stage: Stage::Iteration(i),
                    rmse: mean(ok.iter().map(|o| at(&o.trace_sq_errors, i))).unwrap_or(f64::NAN).sqrt(),
                    nmse: mean(ok.iter().map(|o| at(&o.trace_mask_nmse, i))).unwrap_or(f64::NAN),
                    trials: ok.len(),
                });
            }
            rows.push(TraceRow {
                point,
                estimator: kind,
                stage: Stage::Final,
                rmse: mean(ok.iter().map(|o| o.position_sq_error)).unwrap_or(f64::NAN).sqrt(),
                nmse: mean(ok.iter().map(|o| o.mask_nmse)).unwrap_or(f64::NAN),
                trials: ok.len(),
            });
        }
    }
    rows
}
