use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{position_trace, ExtendedParamVector, ParamVector};
use crate::error::{Error, Result};
use crate::scene::{fault_system_matrix, FailureMask, MaskedModel, PhaseSchedule, Scenario};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// FIMs with a larger eigenvalue spread are reported as singular.
pub const FIM_CONDITION_CAP: f64 = 1e15;

/// `(2/N0) Re{D^H D}`.
pub(crate) fn fisher_from_jacobian(d: &DMatrix<Complex64>, noise_psd: f64) -> DMatrix<f64> {
    let g = d.adjoint() * d;
    let mut j = g.map(|z| z.re * 2.0 / noise_psd);
    // exact symmetry regardless of summation order
    let n = j.nrows();
    for r in 0..n {
        for c in r + 1..n {
            let v = 0.5 * (j[(r, c)] + j[(c, r)]);
            j[(r, c)] = v;
            j[(c, r)] = v;
        }
    }
    j
}

/// Inverts a symmetric positive definite information matrix, rejecting
/// near-singular ones.
pub(crate) fn invert_information(j: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    let eig = SymmetricEigen::new(j.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > FIM_CONDITION_CAP {
        return Err(Error::Singular(format!("{what}: eigenvalues in [{min:e}, {max:e}]")));
    }
    j.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular(format!("{what}: Cholesky failed")))
}

/// FIM for `eta = [Re alpha, Im alpha, p]` with the mask known.
pub fn fim_perfect(
    eta: &ParamVector,
    mask: &FailureMask,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<DMatrix<f64>> {
    let model = MaskedModel::new(scenario, schedule, &mask.mask)?;
    let d = model.jacobian(eta.alpha(), &eta.p)?;
    Ok(fisher_from_jacobian(&d, scenario.noise_psd))
}

/// Position CRB (m²) with the mask known.
pub fn crb_perfect(
    eta: &ParamVector,
    mask: &FailureMask,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<f64> {
    let j = fim_perfect(eta, mask, scenario, schedule)?;
    Ok(position_trace(&invert_information(&j, "perfect-knowledge FIM")?))
}

/// `T × (5 + 2|I|)` derivative of the mean with respect to `eta_2`,
/// columns ordered `[eta, kappa_I, theta_I]`.
pub fn extended_mean_jacobian(
    eta2: &ExtendedParamVector,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<DMatrix<Complex64>> {
    let n = scenario.num_elements();
    let mask = eta2.mask(n)?;
    let model = MaskedModel::new(scenario, schedule, &mask)?;
    let base = model.jacobian(eta2.base.alpha(), &eta2.base.p)?;
    let a = fault_system_matrix(eta2.base.alpha(), &eta2.base.p, scenario, schedule)?;
    let k = eta2.indices.len();
    let mut d = DMatrix::zeros(scenario.num_transmissions(), 5 + 2 * k);
    d.columns_mut(0, 5).copy_from(&base);
    for (i, &idx) in eta2.indices.iter().enumerate() {
        let e = Complex64::from_polar(1.0, eta2.theta[i]);
        let col = a.column(idx);
        d.set_column(5 + i, &(col * e));
        d.set_column(5 + k + i, &(col * (J * eta2.kappa[i] * e)));
    }
    Ok(d)
}

/// FIM for `eta_2`.
pub fn fim_extended(eta2: &ExtendedParamVector, scenario: &Scenario, schedule: &PhaseSchedule) -> Result<DMatrix<f64>> {
    let d = extended_mean_jacobian(eta2, scenario, schedule)?;
    Ok(fisher_from_jacobian(&d, scenario.noise_psd))
}

/// Position CRB (m²) with failure locations known and coefficients unknown.
pub fn crb_knownloc(eta2: &ExtendedParamVector, scenario: &Scenario, schedule: &PhaseSchedule) -> Result<f64> {
    let dim = eta2.dim();
    if dim > 2 * scenario.num_transmissions() {
        return Err(Error::Singular(format!(
            "{dim} unknowns exceed the {} real observations",
            2 * scenario.num_transmissions()
        )));
    }
    let j = fim_extended(eta2, scenario, schedule)?;
    Ok(position_trace(&invert_information(&j, "known-location FIM")?))
}
