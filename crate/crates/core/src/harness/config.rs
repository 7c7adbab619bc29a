use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{GridSpec, L1Options, SuccessiveOptions};
use crate::scene::{diagonal_direction, wavelength_for, Scenario};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RISLOC_OUTPUT_DIR";

const DEFAULT_OUTPUT_DIR: &str = "risloc-out";

/// Largest accepted RIS side and transmission count.
pub const MAX_SIDE: usize = 1024;
pub const MAX_TRANSMISSIONS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Agnostic,
    L1,
    Successive,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Agnostic => "agnostic",
            Self::L1 => "l1",
            Self::Successive => "successive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "agnostic" => Ok(Self::Agnostic),
            "l1" => Ok(Self::L1),
            "successive" => Ok(Self::Successive),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    CrbPerfect,
    CrbKnownloc,
    Lb,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::CrbPerfect => "crb_perfect",
            Self::CrbKnownloc => "crb_knownloc",
            Self::Lb => "lb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "crb_perfect" => Ok(Self::CrbPerfect),
            "crb_knownloc" => Ok(Self::CrbKnownloc),
            "lb" => Ok(Self::Lb),
            other => Err(Error::Config(format!("unknown bound {other:?}"))),
        }
    }
}

/// How failure masks are drawn for each axis point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskMode {
    /// Each element fails independently with probability `p_fail`.
    Bernoulli,
    /// Exactly `floor(N p_fail)` failures at random locations.
    FixedFraction,
    /// Exactly `count` failures, whatever `p_fail` says; `p_fail` still
    /// feeds the detection prior.
    FixedCount { count: usize },
}

impl Default for MaskMode {
    fn default() -> Self {
        Self::FixedFraction
    }
}

/// Failure count of [`MaskMode::FixedFraction`], robust to `N p` landing a
/// rounding error below an integer.
pub fn fixed_fraction_count(num_elements: usize, p_fail: f64) -> usize {
    (num_elements as f64 * p_fail + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 8×8 RIS, `T = 16`, UE at 0.3 m.
    #[default]
    Desk,
    /// 20×20 RIS, `T = 20`, UE at 4 m.
    Paper,
}

/// Scene description; unset fields come from the preset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub preset: Preset,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    /// Hz
    pub carrier_hz: Option<f64>,
    pub num_transmissions: Option<usize>,
    /// BS range from the RIS along the diagonal, m
    pub bs_distance: Option<f64>,
    /// `[re, im]`
    pub channel_gain: Option<[f64; 2]>,
    pub pilot_energy: Option<f64>,
}

impl ScenarioConfig {
    /// Scene with the UE at `distance` along the diagonal (preset range
    /// when `None`) and noise set for `snr_db`.
    pub fn build(&self, distance: Option<f64>, snr_db: f64) -> Result<Scenario> {
        let (rows, cols, t, bs) = match self.preset {
            Preset::Desk => (8, 8, 16, 10.0),
            Preset::Paper => (20, 20, 20, 10.0),
        };
        let (rows, cols, t) =
            (self.rows.unwrap_or(rows), self.cols.unwrap_or(cols), self.num_transmissions.unwrap_or(t));
        if rows == 0 || cols == 0 || rows > MAX_SIDE || cols > MAX_SIDE {
            return Err(Error::Config(format!("RIS must be between 1x1 and {MAX_SIDE}x{MAX_SIDE}, got {rows}x{cols}")));
        }
        if t == 0 || t > MAX_TRANSMISSIONS {
            return Err(Error::Config(format!("num_transmissions must lie in [1, {MAX_TRANSMISSIONS}], got {t}")));
        }
        let u = diagonal_direction();
        let gain = self.channel_gain.map_or(Complex64::new(1.0, 0.0), |[re, im]| Complex64::new(re, im));
        let mut s = Scenario::planar(
            rows,
            cols,
            wavelength_for(self.carrier_hz.unwrap_or(28e9)),
            t,
            self.bs_distance.unwrap_or(bs) * u,
            Vector3::zeros(),
            self.ue_distance(distance) * u,
            gain,
            self.pilot_energy.unwrap_or(1.0),
            1.0,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        if !snr_db.is_finite() {
            return Err(Error::Config(format!("SNR must be finite, got {snr_db} dB")));
        }
        s.set_snr_db(snr_db);
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    /// Nominal UE range, m: `distance` or the preset's.
    pub fn ue_distance(&self, distance: Option<f64>) -> f64 {
        distance.unwrap_or(match self.preset {
            Preset::Desk => crate::scene::DESK_UE_DISTANCE,
            Preset::Paper => 4.0,
        })
    }

    pub fn default_grid(&self) -> GridSpec {
        match self.preset {
            Preset::Desk => GridSpec::desk_default(),
            Preset::Paper => GridSpec::paper_default(),
        }
    }
}

/// Sweep axes; the run visits their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub p_fail: Vec<f64>,
    /// UE ranges along the diagonal, m; empty keeps the preset range.
    #[serde(default)]
    pub distance: Vec<f64>,
    /// Rician factors of the RIS-UE link; empty means pure line of sight.
    #[serde(default)]
    pub k_factor: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { snr_db: vec![20.0], p_fail: vec![0.01], distance: Vec::new(), k_factor: Vec::new() }
    }
}

fn default_trials() -> usize {
    200
}

fn default_mask_draws() -> usize {
    1
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Agnostic, EstimatorKind::L1, EstimatorKind::Successive]
}

/// Complete description of one Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Distinct failure masks (and phase schedules) per axis point; trial
    /// `t` uses draw `t mod mask_draws`.
    #[serde(default = "default_mask_draws")]
    pub mask_draws: usize,
    #[serde(default)]
    pub masks: MaskMode,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub bounds: Vec<BoundKind>,
    /// Skip the receiver noise, leaving only model mismatch.
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    /// Search grid; the preset's default when absent.
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub l1: L1Options,
    #[serde(default)]
    pub successive: SuccessiveOptions,
    /// Output directory; `$RISLOC_OUTPUT_DIR` or `risloc-out` when absent.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: default_trials(),
            mask_draws: default_mask_draws(),
            masks: MaskMode::default(),
            estimators: default_estimators(),
            bounds: Vec::new(),
            noiseless: false,
            scenario: ScenarioConfig::default(),
            grid: None,
            sweep: SweepConfig::default(),
            l1: L1Options::default(),
            successive: SuccessiveOptions::default(),
            output: None,
        }
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPoint {
    pub snr_db: f64,
    pub p_fail: f64,
    /// m; `None` keeps the preset range
    pub distance: Option<f64>,
    pub k_factor: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.unwrap_or_else(|| self.scenario.default_grid())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), PathBuf::from)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.mask_draws == 0 {
            return Err(Error::Config("mask_draws must be at least 1".into()));
        }
        if self.sweep.snr_db.is_empty() || self.sweep.p_fail.is_empty() {
            return Err(Error::Config("snr_db and p_fail axes must be nonempty".into()));
        }
        if let Some(v) = self.sweep.snr_db.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("SNR {v} dB is not finite")));
        }
        if let Some(p) = self.sweep.p_fail.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::Config(format!("p_fail {p} outside [0, 1)")));
        }
        if let Some(d) = self.sweep.distance.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Config(format!("distance {d} must be positive")));
        }
        if let Some(k) = self.sweep.k_factor.iter().find(|k| !(**k >= 0.0)) {
            return Err(Error::Config(format!("Rician K {k} must be >= 0")));
        }
        self.grid().validate().map_err(|e| Error::Config(e.to_string()))?;
        let probe = self.scenario.build(self.sweep.distance.first().copied(), self.sweep.snr_db[0])?;
        if let MaskMode::FixedCount { count } = self.masks {
            if count > probe.num_elements() {
                return Err(Error::Config(format!("{count} failures requested for {} elements", probe.num_elements())));
            }
        }
        Ok(())
    }

    /// Cartesian product of the axes in SNR, p_fail, distance, K order.
    pub fn axis_points(&self) -> Vec<AxisPoint> {
        let distances: Vec<Option<f64>> = if self.sweep.distance.is_empty() {
            vec![None]
        } else {
            self.sweep.distance.iter().copied().map(Some).collect()
        };
        let ks: Vec<Option<f64>> = if self.sweep.k_factor.is_empty() {
            vec![None]
        } else {
            self.sweep.k_factor.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &snr_db in &self.sweep.snr_db {
            for &p_fail in &self.sweep.p_fail {
                for &distance in &distances {
                    for &k_factor in &ks {
                        out.push(AxisPoint { snr_db, p_fail, distance, k_factor });
                    }
                }
            }
        }
        out
    }
}
