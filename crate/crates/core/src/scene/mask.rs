use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-element failure state.
///
/// `mask[n] = c_n * zeta_n + 1 - c_n`: functioning elements carry exactly 1,
/// failing ones their complex response `zeta_n` with `0 < |zeta_n| <= 1`.
/// `zeta[n]` is 1 for functioning elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureMask {
    pub failed: Vec<bool>,
    pub zeta: DVector<Complex64>,
    pub mask: DVector<Complex64>,
}

impl FailureMask {
    /// All elements functioning.
    pub fn ones(n: usize) -> Self {
        Self {
            failed: vec![false; n],
            zeta: DVector::from_element(n, Complex64::new(1.0, 0.0)),
            mask: DVector::from_element(n, Complex64::new(1.0, 0.0)),
        }
    }

    /// Mask with the listed `(index, zeta)` failures.
    pub fn with_failures(n: usize, failures: &[(usize, Complex64)]) -> Result<Self> {
        let mut failed = vec![false; n];
        let mut zeta = DVector::from_element(n, Complex64::new(1.0, 0.0));
        for &(idx, z) in failures {
            if idx >= n {
                return Err(Error::Dimension(format!("failure index {idx} out of range for N={n}")));
            }
            failed[idx] = true;
            zeta[idx] = z;
        }
        Self::from_parts(failed, zeta)
    }

    /// Assembles `m` from indicators and coefficients, checking `0 < |zeta| <= 1` on failures.
    pub fn from_parts(failed: Vec<bool>, zeta: DVector<Complex64>) -> Result<Self> {
        if failed.len() != zeta.len() {
            return Err(Error::Dimension("indicator and coefficient lengths differ".into()));
        }
        let mut mask = DVector::from_element(failed.len(), Complex64::new(1.0, 0.0));
        for (n, &c) in failed.iter().enumerate() {
            if c {
                let r = zeta[n].norm();
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "failure coefficient {} at element {n} is outside the punctured unit disk",
                        zeta[n]
                    )));
                }
                mask[n] = zeta[n];
            }
        }
        Ok(Self { failed, zeta, mask })
    }

    pub fn len(&self) -> usize {
        self.failed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.failed.is_empty()
    }

    /// Sorted indices of failing elements.
    pub fn failing_indices(&self) -> Vec<usize> {
        self.failed.iter().enumerate().filter_map(|(n, &c)| c.then_some(n)).collect()
    }

    pub fn num_failures(&self) -> usize {
        self.failed.iter().filter(|&&c| c).count()
    }
}

fn draw_zeta<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // 1 - U[0,1) lies in (0, 1], so no zero-magnitude draw can occur
    let kappa = 1.0 - rng.random::<f64>();
    let psi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Complex64::from_polar(kappa, psi)
}

/// Independent Bernoulli(`p_fail`) failures with `kappa ~ U(0,1]`, `psi ~ U(-pi, pi)`.
pub fn sample_failure_mask<R: Rng + ?Sized>(p_fail: f64, rng: &mut R, n: usize) -> Result<FailureMask> {
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::InvalidParameter(format!("p_fail must lie in [0, 1], got {p_fail}")));
    }
    let mut failed = vec![false; n];
    let mut zeta = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for i in 0..n {
        if rng.random_bool(p_fail) {
            failed[i] = true;
            zeta[i] = draw_zeta(rng);
        }
    }
    FailureMask::from_parts(failed, zeta)
}

/// Exactly `count` failures at uniformly chosen distinct locations.
pub fn sample_fixed_count_mask<R: Rng + ?Sized>(count: usize, rng: &mut R, n: usize) -> Result<FailureMask> {
    if count > n {
        return Err(Error::InvalidParameter(format!("cannot place {count} failures on {n} elements")));
    }
    let mut idx = index::sample(rng, n, count).into_vec();
    idx.sort_unstable();
    let failures: Vec<_> = idx.into_iter().map(|i| (i, draw_zeta(rng))).collect();
    FailureMask::with_failures(n, &failures)
}

/// Behavior of the coefficient density at the singular point `|zeta| = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PdfAtZero {
    #[default]
    Error,
    Infinity,
}

/// Density of `zeta = kappa e^{j psi}` with `kappa ~ U(0,1)`, `psi ~ U(-pi, pi)`:
/// `1 / (2 pi |zeta|)` inside the unit disk, 0 outside.
pub fn failure_coeff_pdf(zeta: Complex64, at_zero: PdfAtZero) -> Result<f64> {
    let r = zeta.norm();
    if r == 0.0 {
        return match at_zero {
            PdfAtZero::Error => Err(Error::SingularDensity),
            PdfAtZero::Infinity => Ok(f64::INFINITY),
        };
    }
    if r <= 1.0 {
        Ok(1.0 / (2.0 * std::f64::consts::PI * r))
    } else {
        Ok(0.0)
    }
}

/// Log of the coefficient density as used in hypothesis costs.
///
/// Returns `-inf` outside the closed unit disk and at the origin, which marks
/// the hypothesis as inadmissible.
pub fn log_failure_coeff_pdf(zeta: Complex64) -> f64 {
    let r = zeta.norm();
    if r > 0.0 && r <= 1.0 {
        -(2.0 * std::f64::consts::PI * r).ln()
    } else {
        f64::NEG_INFINITY
    }
}
