//! Fixed-mask localization, LASSO mask recovery, and the two joint
//! localization and failure diagnosis (JLFD) algorithms.

mod l1;
mod lasso;
mod localize;
mod successive;

pub use l1::{l1_jlfd, L1Options};
pub use lasso::{lasso_mask, IstaOptions, LassoOutput};
pub use localize::{local_refine, local_refine_within, localize_fixed_mask, Localization, Localizer};
pub use successive::{
    candidate_zeta, hypothesis_cost, joint_zeta_ls, max_iterations_for, successive_jlfd, unit_disk_refine,
    DetectionState, HypothesisCost, JointLs, SuccessiveOptions, ZetaRule,
};

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted `points_per_axis`, a guard against runaway configs.
pub const MAX_POINTS_PER_AXIS: usize = 2001;

/// Search grid in spherical coordinates about the RIS center.
///
/// Azimuth is measured in the X-Y plane from +X, elevation from the X-Y
/// plane towards +Z. The coarse pass scans `points_per_axis²` angle cells on
/// each of `distance_slices` slice centers, then a 1-D distance line of
/// `points_per_axis` points; each refinement level shrinks the window tenfold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// meters
    pub distance_range: (f64, f64),
    /// radians
    pub azimuth_range: (f64, f64),
    /// radians
    pub elevation_range: (f64, f64),
    pub points_per_axis: usize,
    pub refine_levels: usize,
    #[serde(default = "default_slices")]
    pub distance_slices: usize,
}

fn default_slices() -> usize {
    5
}

impl GridSpec {
    /// Full-size search: distance up to 50 m, first-octant angles, `K = 501`.
    pub fn paper_default() -> Self {
        Self {
            distance_range: (0.0, 50.0),
            azimuth_range: (0.0, std::f64::consts::FRAC_PI_2),
            elevation_range: (0.0, std::f64::consts::FRAC_PI_2),
            points_per_axis: 501,
            refine_levels: 2,
            distance_slices: 5,
        }
    }

    /// Reduced search matched to [`crate::scene::Scenario::desk_scale`].
    pub fn desk_default() -> Self {
        Self {
            distance_range: (0.05, 2.0),
            azimuth_range: (0.0, std::f64::consts::FRAC_PI_2),
            elevation_range: (0.0, std::f64::consts::FRAC_PI_2),
            points_per_axis: 61,
            refine_levels: 2,
            distance_slices: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 2 || self.points_per_axis > MAX_POINTS_PER_AXIS {
            return Err(Error::InvalidParameter(format!(
                "points_per_axis must lie in [2, {MAX_POINTS_PER_AXIS}], got {}",
                self.points_per_axis
            )));
        }
        if self.distance_slices == 0 || self.distance_slices > MAX_POINTS_PER_AXIS {
            return Err(Error::InvalidParameter("distance_slices must lie in [1, 2001]".into()));
        }
        if self.refine_levels > 12 {
            return Err(Error::InvalidParameter("refine_levels above 12 is below double resolution".into()));
        }
        for (name, (lo, hi)) in
            [("distance", self.distance_range), ("azimuth", self.azimuth_range), ("elevation", self.elevation_range)]
        {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidParameter(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if self.distance_range.0 < 0.0 {
            return Err(Error::InvalidParameter("distance range must be nonnegative".into()));
        }
        Ok(())
    }

    /// Width of one cell after all refinement levels, in (distance, azimuth, elevation).
    pub fn refined_cell(&self) -> (f64, f64, f64) {
        let shrink = 10f64.powi(self.refine_levels as i32) * (self.points_per_axis - 1) as f64;
        (
            (self.distance_range.1 - self.distance_range.0) / shrink,
            (self.azimuth_range.1 - self.azimuth_range.0) / shrink,
            (self.elevation_range.1 - self.elevation_range.0) / shrink,
        )
    }
}

/// One row of an algorithm's per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub p_hat: Vector3<f64>,
    pub m_hat: DVector<Complex64>,
    /// Selected hypothesis, 0 for "no further failure"; `None` for `l1`.
    pub selected: Option<usize>,
}

/// Output of the JLFD algorithms and of the failure-agnostic baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub alpha_hat: Complex64,
    pub p_hat: Vector3<f64>,
    pub m_hat: DVector<Complex64>,
    /// Sorted indices of elements declared failing.
    pub failing_set: Vec<usize>,
    pub trace: Vec<TraceEntry>,
    /// Outer iterations executed.
    pub iterations: usize,
    pub residual: f64,
}

impl Estimate {
    pub(crate) fn from_localization(loc: &Localization, m_hat: DVector<Complex64>, failing_set: Vec<usize>) -> Self {
        Self {
            alpha_hat: loc.alpha,
            p_hat: loc.p,
            m_hat,
            failing_set,
            trace: Vec::new(),
            iterations: 0,
            residual: loc.residual,
        }
    }
}

/// Failure-agnostic estimate: localization with `m = 1`.
pub fn agnostic(
    y: &DVector<Complex64>,
    schedule: &crate::scene::PhaseSchedule,
    scenario: &crate::scene::Scenario,
    grid: &GridSpec,
) -> Result<Estimate> {
    let n = scenario.num_elements();
    let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let loc = localize_fixed_mask(y, schedule, &ones, grid, scenario)?;
    Ok(Estimate::from_localization(&loc, ones, Vec::new()))
}
