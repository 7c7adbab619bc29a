use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lasso::{ista_centered, IstaOptions};
use super::localize::Localizer;
use super::{Estimate, GridSpec, TraceEntry};
use crate::error::{Error, Result};
use crate::scene::{fault_system_matrix, PhaseSchedule, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L1Options {
    /// Regularizer; `None` uses `2 sqrt(SNR) N0`.
    pub xi: Option<f64>,
    /// Cap `M` on LASSO / localization alternations.
    pub max_iterations: usize,
    /// Position change (m) that ends the alternation.
    pub epsilon: f64,
    pub ista: IstaOptions,
}

impl Default for L1Options {
    fn default() -> Self {
        Self { xi: None, max_iterations: 5, epsilon: 1e-3, ista: IstaOptions::default() }
    }
}

impl L1Options {
    /// Regularizer used for `scenario`.
    pub fn resolved_xi(&self, scenario: &Scenario) -> f64 {
        self.xi.unwrap_or_else(|| 2.0 * scenario.snr().sqrt() * scenario.noise_psd)
    }
}

/// Alternates LASSO mask recovery and fixed-mask localization, then
/// re-localizes under the final mask.
pub fn l1_jlfd(
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
    grid: &GridSpec,
    opts: &L1Options,
) -> Result<Estimate> {
    let xi = opts.resolved_xi(scenario);
    if !(opts.epsilon >= 0.0) {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    let n = scenario.num_elements();
    let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let mut loc = Localizer::new(scenario, schedule, &ones, grid)?.run(y, None)?;
    let mut mask = ones;
    let mut trace = vec![TraceEntry { iteration: 0, p_hat: loc.p, m_hat: mask.clone(), selected: None }];
    if opts.max_iterations == 0 {
        let mut est = Estimate::from_localization(&loc, mask, Vec::new());
        est.trace = trace;
        return Ok(est);
    }

    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let a = fault_system_matrix(loc.alpha, &loc.p, scenario, schedule)?;
        mask = ista_centered(y, &a, xi, &opts.ista, Some(&mask))?.mask;
        let next = Localizer::new(scenario, schedule, &mask, grid)?.run(y, Some(&loc.p))?;
        let moved = (next.p - loc.p).norm();
        loc = next;
        trace.push(TraceEntry { iteration: iterations, p_hat: loc.p, m_hat: mask.clone(), selected: None });
        if moved <= opts.epsilon {
            break;
        }
    }
    let fin = Localizer::new(scenario, schedule, &mask, grid)?.run(y, Some(&loc.p))?;
    let failing = (0..n).filter(|&i| mask[i] != Complex64::new(1.0, 0.0)).collect();
    let mut est = Estimate::from_localization(&fin, mask, failing);
    est.trace = trace;
    est.iterations = iterations;
    Ok(est)
}
