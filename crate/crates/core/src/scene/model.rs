use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use super::{steering_hessians, steering_jacobian, steering_vector, PhaseSchedule, Scenario};
use crate::error::{Error, Result};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Parameter order of `eta = [Re alpha, Im alpha, p_x, p_y, p_z]`.
pub const NUM_PARAMS: usize = 5;

/// Mean model `mu(eta) = alpha S (Phi^T ⊙ 1 m^T) b(p)` for a fixed mask.
///
/// The mask, pilots, schedule and the BS-side steering vector are folded
/// into one `T × N` matrix `G` so that `mu = alpha G a(p)`.
#[derive(Debug, Clone)]
pub struct MaskedModel<'a> {
    scenario: &'a Scenario,
    g: DMatrix<Complex64>,
}

impl<'a> MaskedModel<'a> {
    pub fn new(scenario: &'a Scenario, schedule: &PhaseSchedule, mask: &DVector<Complex64>) -> Result<Self> {
        schedule.check_against(scenario)?;
        if mask.len() != scenario.num_elements() {
            return Err(Error::Dimension(format!(
                "mask has {} entries, scenario has {} elements",
                mask.len(),
                scenario.num_elements()
            )));
        }
        if mask.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("mask".into()));
        }
        let abs = steering_vector(&scenario.bs_position, scenario)?;
        let phi = &schedule.phases;
        let g = DMatrix::from_fn(scenario.num_transmissions(), scenario.num_elements(), |t, n| {
            scenario.pilots[t] * phi[(n, t)] * mask[n] * abs[n]
        });
        Ok(Self { scenario, g })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn num_transmissions(&self) -> usize {
        self.g.nrows()
    }

    /// `h(p) = mu / alpha`.
    pub fn response(&self, p: &Vector3<f64>) -> Result<DVector<Complex64>> {
        Ok(&self.g * steering_vector(p, self.scenario)?)
    }

    pub fn mean(&self, alpha: Complex64, p: &Vector3<f64>) -> Result<DVector<Complex64>> {
        Ok(self.response(p)? * alpha)
    }

    /// Allocation-free `h(p)` for grid scans; returns `false` on degenerate geometry.
    pub(crate) fn response_into(&self, p: &Vector3<f64>, h: &mut DVector<Complex64>) -> bool {
        let s = self.scenario;
        let k = s.wavenumber();
        let eps = s.geometry_epsilon;
        let d0 = (p - s.ris_center).norm();
        if !(d0 > eps) {
            return false;
        }
        h.fill(Complex64::new(0.0, 0.0));
        for (n, pn) in s.elements.iter().enumerate() {
            let dn = (p - pn).norm();
            if !(dn > eps) {
                return false;
            }
            let a = Complex64::from_polar(1.0, -k * (dn - d0));
            h.axpy(a, &self.g.column(n), Complex64::new(1.0, 0.0));
        }
        true
    }

    /// `T × 5` derivative of `mu` with respect to `eta`.
    pub fn jacobian(&self, alpha: Complex64, p: &Vector3<f64>) -> Result<DMatrix<Complex64>> {
        let h = self.response(p)?;
        let dp = &self.g * steering_jacobian(p, self.scenario)?;
        let mut d = DMatrix::zeros(self.num_transmissions(), NUM_PARAMS);
        d.set_column(0, &h);
        d.set_column(1, &(&h * J));
        for c in 0..3 {
            d.set_column(2 + c, &(dp.column(c) * alpha));
        }
        Ok(d)
    }

    /// Second derivatives `d2 mu / d eta_i d eta_j`, row-major `5 × 5`.
    pub fn second_derivatives(&self, alpha: Complex64, p: &Vector3<f64>) -> Result<Vec<DVector<Complex64>>> {
        let t = self.num_transmissions();
        let dp = &self.g * steering_jacobian(p, self.scenario)?;
        let hess = steering_hessians(p, self.scenario)?;
        let mut out = vec![DVector::zeros(t); NUM_PARAMS * NUM_PARAMS];
        for c in 0..3 {
            let col = dp.column(c).into_owned();
            let jcol = &col * J;
            out[2 + c] = col.clone();
            out[(2 + c) * NUM_PARAMS] = col;
            out[NUM_PARAMS + 2 + c] = jcol.clone();
            out[(2 + c) * NUM_PARAMS + 1] = jcol;
        }
        for r in 0..3 {
            for c in r..3 {
                let a2 = DVector::from_fn(hess.len(), |n, _| hess[n][(r, c)]);
                let v = (&self.g * a2) * alpha;
                out[(2 + r) * NUM_PARAMS + 2 + c] = v.clone();
                out[(2 + c) * NUM_PARAMS + 2 + r] = v;
            }
        }
        Ok(out)
    }
}
