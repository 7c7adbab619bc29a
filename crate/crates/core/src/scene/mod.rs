//! Scene model: array geometry, near-field steering, failure masks and
//! forward synthesis of the received pilots.
//!
//! Element layout convention: a `rows × cols` planar grid is stored
//! row-major, element `n = r * cols + c` sits at
//! `ris_center + ((c - (cols-1)/2) * spacing, (r - (rows-1)/2) * spacing, 0)`.
//! Mask dumps use the same mapping so heatmaps can be rebuilt from an index.

mod mask;
mod model;
mod signal;
mod steering;

pub use mask::{
    failure_coeff_pdf, log_failure_coeff_pdf, sample_failure_mask, sample_fixed_count_mask, FailureMask, PdfAtZero,
};
pub use model::{MaskedModel, NUM_PARAMS};
pub use signal::{
    fault_system_matrix, noiseless_mean, synthesize, synthesize_noiseless, synthesize_rician, temporal_code,
    Observation, RicianChannelRealization, TemporalCombiner,
};
pub use steering::{combined_jacobian, combined_response, steering_hessians, steering_jacobian, steering_vector};

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this are treated as coincident points.
pub const DEFAULT_GEOMETRY_EPSILON: f64 = 1e-9;

/// Wavelength in meters for a carrier frequency in Hz.
pub fn wavelength_for(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Unit vector along `[1, 1, 1]`, the diagonal used for BS and UE placement.
pub fn diagonal_direction() -> Vector3<f64> {
    Vector3::new(1.0, 1.0, 1.0).normalize()
}

/// Row-major planar grid in the X-Y plane centered on `center`.
pub fn planar_grid(rows: usize, cols: usize, spacing: f64, center: Vector3<f64>) -> Vec<Vector3<f64>> {
    let r0 = (rows as f64 - 1.0) / 2.0;
    let c0 = (cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(center + Vector3::new((c as f64 - c0) * spacing, (r as f64 - r0) * spacing, 0.0));
        }
    }
    out
}

/// Geometry and radio parameters of one RIS-aided localization scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_position: Vector3<f64>,
    /// RIS center, the phase reference of the steering vectors.
    pub ris_center: Vector3<f64>,
    pub elements: Vec<Vector3<f64>>,
    pub wavelength: f64,
    /// Diagonal of the pilot matrix `S`; length is the number of transmissions.
    pub pilots: Vec<Complex64>,
    pub pilot_energy: f64,
    pub noise_psd: f64,
    pub ue_position: Vector3<f64>,
    pub channel_gain: Complex64,
    /// `(rows, cols)` when the elements came from [`planar_grid`].
    pub grid_shape: Option<(usize, usize)>,
    pub geometry_epsilon: f64,
}

impl Scenario {
    /// Scene with constant pilots `s_t = sqrt(Es)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bs_position: Vector3<f64>,
        ris_center: Vector3<f64>,
        elements: Vec<Vector3<f64>>,
        wavelength: f64,
        num_transmissions: usize,
        pilot_energy: f64,
        noise_psd: f64,
        ue_position: Vector3<f64>,
        channel_gain: Complex64,
    ) -> Result<Self> {
        let scenario = Self {
            bs_position,
            ris_center,
            elements,
            wavelength,
            pilots: vec![Complex64::new(pilot_energy.max(0.0).sqrt(), 0.0); num_transmissions],
            pilot_energy,
            noise_psd,
            ue_position,
            channel_gain,
            grid_shape: None,
            geometry_epsilon: DEFAULT_GEOMETRY_EPSILON,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Planar `rows × cols` RIS at `lambda/2` spacing centered on `ris_center`.
    #[allow(clippy::too_many_arguments)]
    pub fn planar(
        rows: usize,
        cols: usize,
        wavelength: f64,
        num_transmissions: usize,
        bs_position: Vector3<f64>,
        ris_center: Vector3<f64>,
        ue_position: Vector3<f64>,
        channel_gain: Complex64,
        pilot_energy: f64,
        noise_psd: f64,
    ) -> Result<Self> {
        let elements = planar_grid(rows, cols, wavelength / 2.0, ris_center);
        let mut s = Self::new(
            bs_position,
            ris_center,
            elements,
            wavelength,
            num_transmissions,
            pilot_energy,
            noise_psd,
            ue_position,
            channel_gain,
        )?;
        s.grid_shape = Some((rows, cols));
        Ok(s)
    }

    /// 20×20 RIS at 28 GHz, T = 20, BS at 10 m and UE at 4 m along the diagonal.
    pub fn paper_default() -> Self {
        let u = diagonal_direction();
        Self::planar(
            20,
            20,
            wavelength_for(28e9),
            20,
            10.0 * u,
            Vector3::zeros(),
            4.0 * u,
            Complex64::new(1.0, 0.0),
            1.0,
            1.0,
        )
        .expect("paper default scenario is valid")
    }

    /// Reduced 8×8, T = 16 scene used for desk-scale experiments.
    ///
    /// The UE sits 0.3 m out along the diagonal, a little over half the
    /// 0.525 m Fraunhofer distance of the smaller aperture. Further out the
    /// wavefront curvature of 64 elements carries too little range
    /// information, and a single failure drags the failure-agnostic fit
    /// towards infinite distance.
    pub fn desk_scale() -> Self {
        let u = diagonal_direction();
        Self::planar(
            8,
            8,
            wavelength_for(28e9),
            16,
            10.0 * u,
            Vector3::zeros(),
            DESK_UE_DISTANCE * u,
            Complex64::new(1.0, 0.0),
            1.0,
            1.0,
        )
        .expect("desk scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::InvalidParameter("scenario needs at least one element".into()));
        }
        if self.pilots.is_empty() {
            return Err(Error::InvalidParameter("scenario needs T >= 1 transmissions".into()));
        }
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive(self.wavelength, "wavelength")?;
        positive(self.noise_psd, "noise_psd")?;
        positive(self.pilot_energy, "pilot_energy")?;
        if !(self.geometry_epsilon >= 0.0) {
            return Err(Error::InvalidParameter("geometry_epsilon must be >= 0".into()));
        }
        let finite3 = |v: &Vector3<f64>| v.iter().all(|x| x.is_finite());
        if !finite3(&self.bs_position)
            || !finite3(&self.ris_center)
            || !finite3(&self.ue_position)
            || !self.elements.iter().all(finite3)
        {
            return Err(Error::NonFinite("scenario positions".into()));
        }
        if !self.channel_gain.re.is_finite()
            || !self.channel_gain.im.is_finite()
            || !self.pilots.iter().all(|s| s.re.is_finite() && s.im.is_finite())
        {
            return Err(Error::NonFinite("scenario gains or pilots".into()));
        }
        if let Some((r, c)) = self.grid_shape {
            if r * c != self.elements.len() {
                return Err(Error::Dimension(format!(
                    "grid shape {r}x{c} does not match {} elements",
                    self.elements.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_transmissions(&self) -> usize {
        self.pilots.len()
    }

    /// Linear SNR `|alpha|^2 Es / N0`.
    pub fn snr(&self) -> f64 {
        self.channel_gain.norm_sqr() * self.pilot_energy / self.noise_psd
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }

    /// Sets `N0` so that the SNR equals `snr_db`, keeping gain and pilots fixed.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        let snr = 10f64.powf(snr_db / 10.0);
        self.noise_psd = self.channel_gain.norm_sqr() * self.pilot_energy / snr;
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.set_snr_db(snr_db);
        self
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// True parameter `[Re alpha, Im alpha, p]`.
    pub fn true_params(&self) -> crate::bounds::ParamVector {
        crate::bounds::ParamVector::new(self.channel_gain, self.ue_position)
    }
}

/// UE range used by [`Scenario::desk_scale`].
pub const DESK_UE_DISTANCE: f64 = 0.3;

/// Designer-controlled RIS weights: an `N × T` matrix whose column `t` is
/// the profile applied during transmission `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phases: DMatrix<Complex64>,
}

impl PhaseSchedule {
    /// Unit-modulus tolerance accepted by [`PhaseSchedule::from_matrix`].
    pub const UNIT_TOLERANCE: f64 = 1e-9;

    /// i.i.d. phases uniform on `[-pi, pi)`.
    pub fn random<R: Rng + ?Sized>(num_elements: usize, num_transmissions: usize, rng: &mut R) -> Self {
        let phases = DMatrix::from_fn(num_elements, num_transmissions, |_, _| {
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            Complex64::from_polar(1.0, theta)
        });
        Self { phases }
    }

    pub fn from_matrix(phases: DMatrix<Complex64>) -> Result<Self> {
        for z in phases.iter() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite("phase schedule entry".into()));
            }
            if (z.norm() - 1.0).abs() > Self::UNIT_TOLERANCE {
                return Err(Error::InvalidParameter(format!("phase schedule entry {z} is not unit modulus")));
            }
        }
        Ok(Self { phases })
    }

    pub fn num_elements(&self) -> usize {
        self.phases.nrows()
    }

    pub fn num_transmissions(&self) -> usize {
        self.phases.ncols()
    }

    pub(crate) fn check_against(&self, scenario: &Scenario) -> Result<()> {
        if self.num_elements() != scenario.num_elements() || self.num_transmissions() != scenario.num_transmissions() {
            return Err(Error::Dimension(format!(
                "schedule is {}x{}, scenario has N={} T={}",
                self.num_elements(),
                self.num_transmissions(),
                scenario.num_elements(),
                scenario.num_transmissions()
            )));
        }
        Ok(())
    }
}
