use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{fault_system_matrix, PhaseSchedule, Scenario};

/// Stopping rule for ISTA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IstaOptions {
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IstaOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOutput {
    pub mask: DVector<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Complex soft threshold `u max(0, 1 - tau/|u|)`.
fn soft(u: Complex64, tau: f64) -> Complex64 {
    let r = u.norm();
    if r <= tau {
        Complex64::new(0.0, 0.0)
    } else {
        u * (1.0 - tau / r)
    }
}

/// Largest eigenvalue of `A^H A`, computed on the smaller Gram side.
pub(crate) fn spectral_norm_sq(a: &DMatrix<Complex64>) -> f64 {
    let gram = if a.nrows() <= a.ncols() { a * a.adjoint() } else { a.adjoint() * a };
    SymmetricEigen::new(gram).eigenvalues.max().max(0.0)
}

/// ISTA on `||c - A u||² + xi ||u||_1`, returning `m = 1 + u`.
pub(crate) fn ista_centered(
    y: &DVector<Complex64>,
    a: &DMatrix<Complex64>,
    xi: f64,
    opts: &IstaOptions,
    warm: Option<&DVector<Complex64>>,
) -> Result<LassoOutput> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::InvalidParameter(format!("regularizer must be finite and >= 0, got {xi}")));
    }
    if y.iter().chain(a.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("LASSO inputs".into()));
    }
    let n = a.ncols();
    let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let c = y - a * &ones;
    let l = spectral_norm_sq(a);
    if l == 0.0 {
        return Ok(LassoOutput { mask: ones, iterations: 0, converged: true });
    }
    let gram = a.adjoint() * a;
    let ahc = a.adjoint() * &c;
    let tau = xi / (2.0 * l);
    let objective = |u: &DVector<Complex64>| (&c - a * u).norm_squared() + xi * u.iter().map(|z| z.norm()).sum::<f64>();
    let mut u = match warm {
        Some(m) if m.len() == n => m - &ones,
        _ => DVector::zeros(n),
    };
    let mut f = objective(&u);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let grad = &ahc - &gram * &u;
        let next = DVector::from_fn(n, |i, _| soft(u[i] + grad[i] / l, tau));
        let f_next = objective(&next);
        let change = (f - f_next).abs();
        u = next;
        let done = change <= opts.tol * f_next.max(f64::MIN_POSITIVE) || f_next == 0.0;
        f = f_next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(LassoOutput { mask: u + ones, iterations, converged })
}

/// `argmin_m ||y - A(alpha, p) m||² + xi ||m - 1||_1` by ISTA.
pub fn lasso_mask(
    y: &DVector<Complex64>,
    alpha: Complex64,
    p: &Vector3<f64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
    xi: f64,
    opts: &IstaOptions,
) -> Result<LassoOutput> {
    let a = fault_system_matrix(alpha, p, scenario, schedule)?;
    if y.len() != a.nrows() {
        return Err(Error::Dimension(format!("observation has {} samples, expected {}", y.len(), a.nrows())));
    }
    ista_centered(y, &a, xi, opts, None)
}
