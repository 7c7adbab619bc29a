//! Seeded Monte-Carlo sweeps, ensemble metrics, CSV/JSON output and the CLI.
//!
//! Every random stream is derived from the master seed: the phase schedule
//! and failure mask from `(p_fail, mask draw)`, the noise from
//! `(axis point, trial)`. Failure locations therefore stay fixed while SNR,
//! distance or the Rician factor vary.

pub mod cli;
mod config;
mod metrics;
mod output;
mod run;

pub use config::{
    fixed_fraction_count, AxisPoint, BoundKind, EstimatorKind, ExperimentConfig, MaskMode, Preset, ScenarioConfig,
    SweepConfig, MAX_SIDE, MAX_TRANSMISSIONS, OUTPUT_DIR_ENV,
};
pub use metrics::{metrics, trace_metrics, EstimatorSummary, PointSummary, Stage, TraceRow};
pub use output::{
    summary_header, trial_header, write_mask_csv, write_sidecar, write_summary_csv, write_trace_csv, write_trials_csv,
    Sidecar, SCHEMA_VERSION, TRACE_HEADER,
};
pub use run::{
    derive_seed, draw_mask, isolate, mask_demo, mask_seed, noise_seed, observe_trial, point_scenario, run_estimator,
    run_point, run_sweep, BoundValues, EstimatorOutcome, EstimatorRecord, MaskDemo, MaskDraw, TrialResult,
};

use crate::error::{Error, Result};
use crate::scene::Scenario;

/// `2 D² / λ` with `D` the largest distance between two RIS elements, m.
pub fn fraunhofer_distance(scenario: &Scenario) -> Result<f64> {
    let e = &scenario.elements;
    if e.len() < 2 {
        return Err(Error::InvalidParameter(format!("aperture needs at least 2 elements, got {}", e.len())));
    }
    let mut d2: f64 = 0.0;
    for (i, a) in e.iter().enumerate() {
        for b in &e[i + 1..] {
            d2 = d2.max((a - b).norm_squared());
        }
    }
    Ok(2.0 * d2 / scenario.wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn paper_aperture_boundary() {
        let d = fraunhofer_distance(&Scenario::paper_default()).unwrap();
        assert!((d - 3.86).abs() <= 0.01, "{d}");
    }

    #[test]
    fn two_elements_half_wavelength_apart() {
        let mut s = Scenario::desk_scale();
        let lambda = s.wavelength;
        s.elements = vec![Vector3::zeros(), Vector3::new(lambda / 2.0, 0.0, 0.0)];
        let d = fraunhofer_distance(&s).unwrap();
        assert!((d - lambda / 2.0).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_grid_matches_corner_diagonal() {
        let mut s = Scenario::desk_scale();
        let h = s.wavelength / 2.0;
        s.elements = crate::scene::planar_grid(3, 3, h, Vector3::zeros());
        // Corners are 2h apart on each axis.
        let diag2 = 2.0 * (2.0 * h) * (2.0 * h);
        let d = fraunhofer_distance(&s).unwrap();
        assert!((d - 2.0 * diag2 / s.wavelength).abs() < 1e-14);
    }

    #[test]
    fn single_element_is_rejected() {
        let mut s = Scenario::desk_scale();
        s.elements.truncate(1);
        assert!(fraunhofer_distance(&s).is_err());
    }
}
