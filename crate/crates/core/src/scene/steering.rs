use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;

use super::Scenario;
use crate::error::{Error, Result};

const J: Complex64 = Complex64::new(0.0, 1.0);

fn distance_checked(p: &Vector3<f64>, q: &Vector3<f64>, eps: f64, what: &dyn Fn() -> String) -> Result<f64> {
    let d = (p - q).norm();
    if !d.is_finite() {
        return Err(Error::NonFinite("position".into()));
    }
    if d <= eps {
        return Err(Error::DegenerateGeometry { what: what(), distance: d });
    }
    Ok(d)
}

/// Near-field steering vector referenced to the RIS center:
/// `[a(p)]_n = exp(-j k (|p - p_n| - |p - p_ris|))`.
pub fn steering_vector(p: &Vector3<f64>, scenario: &Scenario) -> Result<DVector<Complex64>> {
    let k = scenario.wavenumber();
    let eps = scenario.geometry_epsilon;
    let d0 = distance_checked(p, &scenario.ris_center, eps, &|| "the RIS center".into())?;
    let mut a = DVector::zeros(scenario.num_elements());
    for (n, pn) in scenario.elements.iter().enumerate() {
        let dn = distance_checked(p, pn, eps, &|| format!("element {n}"))?;
        a[n] = Complex64::from_polar(1.0, -k * (dn - d0));
    }
    Ok(a)
}

/// `N × 3` derivative of [`steering_vector`] with respect to `p`.
pub fn steering_jacobian(p: &Vector3<f64>, scenario: &Scenario) -> Result<DMatrix<Complex64>> {
    let a = steering_vector(p, scenario)?;
    let k = scenario.wavenumber();
    let u0 = (p - scenario.ris_center).normalize();
    let mut jac = DMatrix::zeros(scenario.num_elements(), 3);
    for (n, pn) in scenario.elements.iter().enumerate() {
        let grad = (p - pn).normalize() - u0;
        let scale = a[n] * (-J * k);
        for c in 0..3 {
            jac[(n, c)] = scale * grad[c];
        }
    }
    Ok(jac)
}

/// Per-element `3 × 3` second derivatives of [`steering_vector`].
///
/// With `g = grad(phase)` and `H = hess(phase)`,
/// `d2 a_n = a_n ((-jk)^2 g g^T + (-jk) H)` where the phase Hessian of a
/// distance `|p - q|` is `(I - u u^T) / |p - q|`.
pub fn steering_hessians(p: &Vector3<f64>, scenario: &Scenario) -> Result<Vec<Matrix3<Complex64>>> {
    let a = steering_vector(p, scenario)?;
    let k = scenario.wavenumber();
    let r0 = p - scenario.ris_center;
    let d0 = r0.norm();
    let u0 = r0 / d0;
    let h0 = (Matrix3::identity() - u0 * u0.transpose()) / d0;
    let mjk = -J * k;
    let out = scenario
        .elements
        .iter()
        .enumerate()
        .map(|(n, pn)| {
            let rn = p - pn;
            let dn = rn.norm();
            let un = rn / dn;
            let g = un - u0;
            let h = (Matrix3::identity() - un * un.transpose()) / dn - h0;
            let gg = g * g.transpose();
            Matrix3::from_fn(|i, j| a[n] * (mjk * mjk * gg[(i, j)] + mjk * h[(i, j)]))
        })
        .collect();
    Ok(out)
}

/// Cascaded BS-RIS-UE response `b(p) = a(p) ⊙ a(p_bs)`.
pub fn combined_response(p: &Vector3<f64>, scenario: &Scenario) -> Result<DVector<Complex64>> {
    let a = steering_vector(p, scenario)?;
    let abs = steering_vector(&scenario.bs_position, scenario)?;
    Ok(a.component_mul(&abs))
}

/// `N × 3` derivative of [`combined_response`] with respect to `p`.
pub fn combined_jacobian(p: &Vector3<f64>, scenario: &Scenario) -> Result<DMatrix<Complex64>> {
    let mut jac = steering_jacobian(p, scenario)?;
    let abs = steering_vector(&scenario.bs_position, scenario)?;
    for (n, mut row) in jac.row_iter_mut().enumerate() {
        row *= abs[n];
    }
    Ok(jac)
}
