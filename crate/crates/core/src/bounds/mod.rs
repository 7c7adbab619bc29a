//! Fisher information, CRBs with perfect or location-only failure knowledge,
//! and the misspecified bound (MCRB) plus bias for a failure-agnostic receiver.

mod fim;
mod mcrb;

pub use fim::{crb_knownloc, crb_perfect, extended_mean_jacobian, fim_extended, fim_perfect, FIM_CONDITION_CAP};
pub use mcrb::{
    compute_bounds, lower_bound, mcrb, mcrb_matrices, pseudo_true, McrbMatrices, PseudoTrue, STATIONARITY_TOLERANCE,
};

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::FailureMask;

/// `eta = [Re alpha, Im alpha, p]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub p: Vector3<f64>,
}

impl ParamVector {
    pub fn new(alpha: Complex64, p: Vector3<f64>) -> Self {
        Self { alpha_re: alpha.re, alpha_im: alpha.im, p }
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.alpha_re, self.alpha_im)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.alpha_re, self.alpha_im, self.p.x, self.p.y, self.p.z])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 5 {
            return Err(Error::Dimension(format!("parameter vector needs 5 entries, got {}", v.len())));
        }
        Ok(Self { alpha_re: v[0], alpha_im: v[1], p: Vector3::new(v[2], v[3], v[4]) })
    }
}

/// `eta_2 = [eta, kappa_I, theta_I]` for failures at known indices `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedParamVector {
    pub base: ParamVector,
    pub indices: Vec<usize>,
    pub kappa: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ExtendedParamVector {
    pub fn new(base: ParamVector, indices: Vec<usize>, kappa: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if indices.len() != kappa.len() || indices.len() != theta.len() {
            return Err(Error::Dimension("index, magnitude and phase lists differ in length".into()));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(Error::InvalidParameter("duplicate failure index".into()));
        }
        Ok(Self { base, indices, kappa, theta })
    }

    /// Extended parameters of the true failures in `mask`.
    pub fn from_mask(base: ParamVector, mask: &FailureMask) -> Self {
        let indices = mask.failing_indices();
        let kappa = indices.iter().map(|&n| mask.zeta[n].norm()).collect();
        let theta = indices.iter().map(|&n| mask.zeta[n].arg()).collect();
        Self { base, indices, kappa, theta }
    }

    pub fn dim(&self) -> usize {
        5 + 2 * self.indices.len()
    }

    /// Mask with `kappa e^{j theta}` on `I` and 1 elsewhere.
    pub fn mask(&self, num_elements: usize) -> Result<DVector<Complex64>> {
        let mut m = DVector::from_element(num_elements, Complex64::new(1.0, 0.0));
        for (i, &n) in self.indices.iter().enumerate() {
            if n >= num_elements {
                return Err(Error::Dimension(format!("failure index {n} out of range for N={num_elements}")));
            }
            m[n] = Complex64::from_polar(self.kappa[i], self.theta[i]);
        }
        Ok(m)
    }
}

/// Theoretical limits for one scenario and failure realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// m²
    pub crb_perfect_pos: f64,
    /// m²
    pub crb_knownloc_pos: f64,
    pub mcrb_matrix: DMatrix<f64>,
    pub pseudo_true: ParamVector,
    pub lb_matrix: DMatrix<f64>,
    /// m²
    pub lb_pos: f64,
    pub pseudo_true_non_unique: bool,
    pub stationary: bool,
}

pub(crate) fn position_trace(m: &DMatrix<f64>) -> f64 {
    m[(2, 2)] + m[(3, 3)] + m[(4, 4)]
}
