use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{fixed_fraction_count, AxisPoint, BoundKind, EstimatorKind, ExperimentConfig, MaskMode};
use crate::bounds::{crb_knownloc, crb_perfect, lower_bound, mcrb, mcrb_matrices, pseudo_true, ExtendedParamVector};
use crate::error::Result;
use crate::estimators::{agnostic, l1_jlfd, successive_jlfd, Estimate, GridSpec};
use crate::scene::{
    sample_failure_mask, sample_fixed_count_mask, synthesize, synthesize_rician, FailureMask, PhaseSchedule,
    RicianChannelRealization, Scenario,
};

const TAG_MASK: u64 = 0x6d61_736b;
const TAG_NOISE: u64 = 0x6e6f_6973;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed of `master` for the given path of tags.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &t| mix(acc ^ mix(t)))
}

fn point_key(point: &AxisPoint) -> [u64; 4] {
    [
        point.snr_db.to_bits(),
        point.p_fail.to_bits(),
        point.distance.map_or(u64::MAX, f64::to_bits),
        point.k_factor.map_or(u64::MAX, f64::to_bits),
    ]
}

/// Seed of mask draw `draw`. It depends on `p_fail` only, so the same
/// failure locations and phase schedule recur across SNR, distance and K.
pub fn mask_seed(master: u64, p_fail: f64, draw: usize) -> u64 {
    derive_seed(master, &[TAG_MASK, p_fail.to_bits(), draw as u64])
}

pub fn noise_seed(master: u64, point: &AxisPoint, trial: usize) -> u64 {
    let k = point_key(point);
    derive_seed(master, &[TAG_NOISE, k[0], k[1], k[2], k[3], trial as u64])
}

/// Metrics of one estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub p_hat: Vector3<f64>,
    pub alpha_hat: Complex64,
    /// m²
    pub position_sq_error: f64,
    pub mask_sq_error: f64,
    /// `||m_hat - m||² / ||m||²`
    pub mask_nmse: f64,
    pub num_detected: usize,
    pub iterations: usize,
    /// Position squared error (m²) of each trace entry.
    pub trace_sq_errors: Vec<f64>,
    pub trace_mask_nmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub estimator: EstimatorKind,
    /// `Err` carries the diagnostic of a failed or panicking run.
    pub outcome: std::result::Result<EstimatorOutcome, String>,
}

/// Bounds of the trial's mask draw; all in m² except the bias.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub crb_perfect: Option<f64>,
    pub crb_knownloc: Option<f64>,
    pub lb: Option<f64>,
    /// Distance from the pseudo-true position to the UE, m
    pub pseudo_true_bias: Option<f64>,
    pub stationary: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub point: AxisPoint,
    /// m
    pub ue_distance: f64,
    pub trial: usize,
    pub mask_draw: usize,
    pub seed: u64,
    pub num_failures: usize,
    pub estimates: Vec<EstimatorRecord>,
    pub bounds: BoundValues,
}

/// Failure mask and phase schedule shared by the trials of one draw.
#[derive(Debug, Clone)]
pub struct MaskDraw {
    pub schedule: PhaseSchedule,
    pub mask: FailureMask,
}

/// Draws the schedule, then the mask, from the draw's own stream.
pub fn draw_mask(config: &ExperimentConfig, scenario: &Scenario, p_fail: f64, draw: usize) -> Result<MaskDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed(config.seed, p_fail, draw));
    let n = scenario.num_elements();
    let schedule = PhaseSchedule::random(n, scenario.num_transmissions(), &mut rng);
    let mask = match config.masks {
        MaskMode::Bernoulli => sample_failure_mask(p_fail, &mut rng, n)?,
        MaskMode::FixedFraction => sample_fixed_count_mask(fixed_fraction_count(n, p_fail), &mut rng, n)?,
        MaskMode::FixedCount { count } => sample_fixed_count_mask(count, &mut rng, n)?,
    };
    Ok(MaskDraw { schedule, mask })
}

/// Point scenario: preset scene at the point's distance and SNR.
pub fn point_scenario(config: &ExperimentConfig, point: &AxisPoint) -> Result<Scenario> {
    config.scenario.build(point.distance, point.snr_db)
}

fn bound_values(
    kinds: &[BoundKind],
    scenario: &Scenario,
    draw: &MaskDraw,
    grid: &GridSpec,
    line_of_sight: bool,
) -> BoundValues {
    let mut out = BoundValues::default();
    if kinds.is_empty() {
        return out;
    }
    if !line_of_sight {
        out.error = Some("bounds assume a line-of-sight RIS-UE link".into());
        return out;
    }
    let eta = scenario.true_params();
    let mut errors = Vec::new();
    for kind in kinds {
        let r = match kind {
            BoundKind::CrbPerfect => {
                crb_perfect(&eta, &draw.mask, scenario, &draw.schedule).map(|v| out.crb_perfect = Some(v))
            }
            BoundKind::CrbKnownloc => {
                crb_knownloc(&ExtendedParamVector::from_mask(eta, &draw.mask), scenario, &draw.schedule)
                    .map(|v| out.crb_knownloc = Some(v))
            }
            BoundKind::Lb => (|| {
                let pt = pseudo_true(&eta, &draw.mask, scenario, &draw.schedule, grid)?;
                let mats = mcrb_matrices(&pt.eta, &eta, &draw.mask, scenario, &draw.schedule)?;
                let (_, lb) = lower_bound(&mcrb(&mats.a, &mats.b)?, &pt.eta, &eta);
                out.lb = Some(lb);
                out.pseudo_true_bias = Some((pt.eta.p - eta.p).norm());
                out.stationary = Some(mats.stationary);
                Ok(())
            })(),
        };
        if let Err(e) = r {
            errors.push(format!("{}: {e}", kind.name()));
        }
    }
    if !errors.is_empty() {
        out.error = Some(errors.join("; "));
    }
    out
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".into()
    }
}

/// Runs `f`, turning errors and panics into a diagnostic string.
pub fn isolate<T>(f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(payload) => Err(panic_message(payload)),
    }
}

fn mask_errors(m_hat: &DVector<Complex64>, truth: &FailureMask) -> (f64, f64) {
    let err = (m_hat - &truth.mask).norm_squared();
    (err, err / truth.mask.norm_squared())
}

/// Runs one estimator on `y`.
pub fn run_estimator(
    kind: EstimatorKind,
    config: &ExperimentConfig,
    point: &AxisPoint,
    y: &DVector<Complex64>,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<Estimate> {
    let grid = config.grid();
    match kind {
        EstimatorKind::Agnostic => agnostic(y, schedule, scenario, &grid),
        EstimatorKind::L1 => l1_jlfd(y, schedule, scenario, &grid, &config.l1),
        EstimatorKind::Successive => successive_jlfd(y, schedule, scenario, &grid, point.p_fail, &config.successive),
    }
}

fn outcome(est: &Estimate, scenario: &Scenario, truth: &FailureMask) -> EstimatorOutcome {
    let (mask_sq_error, mask_nmse) = mask_errors(&est.m_hat, truth);
    EstimatorOutcome {
        p_hat: est.p_hat,
        alpha_hat: est.alpha_hat,
        position_sq_error: (est.p_hat - scenario.ue_position).norm_squared(),
        mask_sq_error,
        mask_nmse,
        num_detected: est.failing_set.len(),
        iterations: est.iterations,
        trace_sq_errors: est.trace.iter().map(|e| (e.p_hat - scenario.ue_position).norm_squared()).collect(),
        trace_mask_nmse: est.trace.iter().map(|e| mask_errors(&e.m_hat, truth).1).collect(),
    }
}

/// Draws the observation of one trial.
pub fn observe_trial(
    config: &ExperimentConfig,
    point: &AxisPoint,
    scenario: &Scenario,
    draw: &MaskDraw,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<Complex64>> {
    let mut source = scenario.clone();
    if config.noiseless {
        source.noise_psd = 0.0;
    }
    let obs = match point.k_factor {
        None => synthesize(&source, &draw.schedule, &draw.mask, rng)?,
        Some(k) => {
            let n = scenario.num_elements();
            let real = RicianChannelRealization::draw(Complex64::new(1.0, 0.0), scenario.channel_gain, k, n, rng)?;
            synthesize_rician(&source, &draw.schedule, &draw.mask, &real, rng)?
        }
    };
    Ok(obs.y)
}

/// All trials of one axis point, ordered by trial index.
///
/// Failures of one estimator on one trial are recorded in that trial's row
/// and never abort the point.
pub fn run_point(config: &ExperimentConfig, point: &AxisPoint) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let scenario = point_scenario(config, point)?;
    let grid = config.grid();
    let draws = config.mask_draws.min(config.trials);
    let prepared: Vec<(MaskDraw, BoundValues)> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let draw = draw_mask(config, &scenario, point.p_fail, d)?;
            let bounds = bound_values(&config.bounds, &scenario, &draw, &grid, point.k_factor.is_none());
            Ok((draw, bounds))
        })
        .collect::<Result<_>>()?;

    let results = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let d = trial % draws;
            let (draw, bounds) = &prepared[d];
            let seed = noise_seed(config.seed, point, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = isolate(|| observe_trial(config, point, &scenario, draw, &mut rng));
            let estimates = config
                .estimators
                .iter()
                .map(|&kind| {
                    let outcome = match &y {
                        Ok(y) => isolate(|| run_estimator(kind, config, point, y, &scenario, &draw.schedule))
                            .map(|est| outcome(&est, &scenario, &draw.mask)),
                        Err(e) => Err(format!("observation: {e}")),
                    };
                    EstimatorRecord { estimator: kind, outcome }
                })
                .collect();
            TrialResult {
                point: *point,
                ue_distance: config.scenario.ue_distance(point.distance),
                trial,
                mask_draw: d,
                seed,
                num_failures: draw.mask.num_failures(),
                estimates,
                bounds: bounds.clone(),
            }
        })
        .collect();
    Ok(results)
}

/// Every axis point in canonical order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let mut out = Vec::new();
    for point in config.axis_points() {
        out.extend(run_point(config, &point)?);
    }
    Ok(out)
}

/// True and estimated masks of one trial, for mask dumps.
#[derive(Debug, Clone)]
pub struct MaskDemo {
    pub scenario: Scenario,
    pub truth: FailureMask,
    pub estimates: Vec<(EstimatorKind, std::result::Result<Estimate, String>)>,
}

pub fn mask_demo(config: &ExperimentConfig, point: &AxisPoint, trial: usize) -> Result<MaskDemo> {
    config.validate()?;
    let scenario = point_scenario(config, point)?;
    let draw = draw_mask(config, &scenario, point.p_fail, trial % config.mask_draws)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(config.seed, point, trial));
    let y = observe_trial(config, point, &scenario, &draw, &mut rng)?;
    let estimates = config
        .estimators
        .iter()
        .map(|&k| (k, isolate(|| run_estimator(k, config, point, &y, &scenario, &draw.schedule))))
        .collect();
    Ok(MaskDemo { scenario, truth: draw.mask, estimates })
}

/// Groups results by axis point, keeping first-seen order.
pub(crate) fn group_by_point(results: &[TrialResult]) -> Vec<(AxisPoint, Vec<&TrialResult>)> {
    let mut index: HashMap<[u64; 4], usize> = HashMap::new();
    let mut groups: Vec<(AxisPoint, Vec<&TrialResult>)> = Vec::new();
    for r in results {
        let key = point_key(&r.point);
        let i = *index.entry(key).or_insert_with(|| {
            groups.push((r.point, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(r);
    }
    groups
}

impl TrialResult {
    pub fn estimate(&self, kind: EstimatorKind) -> Option<&std::result::Result<EstimatorOutcome, String>> {
        self.estimates.iter().find(|e| e.estimator == kind).map(|e| &e.outcome)
    }
}
