use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fim::{crb_knownloc, crb_perfect, invert_information};
use super::{position_trace, BoundReport, ExtendedParamVector, ParamVector};
use crate::error::{Error, Result};
use crate::estimators::{local_refine_within, GridSpec, Localizer};
use crate::scene::{FailureMask, MaskedModel, PhaseSchedule, Scenario, NUM_PARAMS};

/// Largest accepted `|Re{D_i^H r}| / (||D_i|| ||mu||)` at the pseudo-true point.
pub const STATIONARITY_TOLERANCE: f64 = 1e-8;

/// Relative cost gap below which two distinct fits count as a tie.
const TIE_TOLERANCE: f64 = 1e-10;

/// Pseudo-true parameter of the all-functioning model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoTrue {
    pub eta: ParamVector,
    /// `||mu - mu_assumed(eta_0)||²`
    pub cost: f64,
    pub stationarity: f64,
    pub non_unique: bool,
}

fn stationarity(d: &DMatrix<Complex64>, r: &DVector<Complex64>, scale: f64) -> f64 {
    let dh_r = d.adjoint() * r;
    (0..d.ncols())
        .map(|i| {
            let n = d.column(i).norm() * scale;
            if n > 0.0 {
                dh_r[i].re.abs() / n
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// KL minimizer of the failure-agnostic model against the true one, over
/// the parameter set spanned by `grid`.
///
/// For equal-covariance Gaussians this is the least-squares fit of
/// `alpha S Phi^T b(p)` to the true noiseless mean. The fit is confined to
/// the search region the estimators use; a minimizer pinned to its boundary
/// shows up as `stationarity` above tolerance. Two candidates are
/// refined: the grid localizer's fit and a local fit started at the true
/// parameter; the lower cost wins.
pub fn pseudo_true(
    true_eta: &ParamVector,
    mask: &FailureMask,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
    grid: &GridSpec,
) -> Result<PseudoTrue> {
    let truth = MaskedModel::new(scenario, schedule, &mask.mask)?;
    let mu = truth.mean(true_eta.alpha(), &true_eta.p)?;
    let ones = DVector::from_element(scenario.num_elements(), Complex64::new(1.0, 0.0));
    let localizer = Localizer::new(scenario, schedule, &ones, grid)?;
    let assumed = localizer.model();

    let from_grid = localizer.run(&mu, None)?;
    let from_truth = local_refine_within(assumed, &mu, true_eta.alpha(), true_eta.p, 200, grid)?;
    let scale = mu.norm_squared().max(f64::MIN_POSITIVE);
    let (alpha, p, cost) = if from_truth.2 <= from_grid.residual {
        from_truth
    } else {
        (from_grid.alpha, from_grid.p, from_grid.residual)
    };
    let distinct = (from_truth.1 - from_grid.p).norm() > 1e-6;
    let tied = (from_truth.2 - from_grid.residual).abs() <= TIE_TOLERANCE * scale;
    let non_unique = from_grid.tie || (distinct && tied);

    let r = &mu - assumed.mean(alpha, &p)?;
    let d = assumed.jacobian(alpha, &p)?;
    let stat = stationarity(&d, &r, mu.norm());
    Ok(PseudoTrue { eta: ParamVector::new(alpha, p), cost, stationarity: stat, non_unique })
}

/// Closed-form `A` and `B` of the misspecified bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McrbMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub stationarity: f64,
    /// `stationarity < STATIONARITY_TOLERANCE`; the bias decomposition of the
    /// bound assumes it.
    pub stationary: bool,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `A_ij = (2/N0) Re{r^H d2 mu_ij - [D^H D]_ij}` and
/// `B_ij = (2/N0) Re{[D^H D]_ij} + (4/N0²) Re{[D^H r]_i} Re{[D^H r]_j}`,
/// with `r = mu - mu_assumed(eta_0)` and `D`, `d2 mu` of the assumed model at `eta_0`.
pub fn mcrb_matrices(
    pseudo: &ParamVector,
    true_eta: &ParamVector,
    mask: &FailureMask,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<McrbMatrices> {
    let n0 = scenario.noise_psd;
    let truth = MaskedModel::new(scenario, schedule, &mask.mask)?;
    let ones = DVector::from_element(scenario.num_elements(), Complex64::new(1.0, 0.0));
    let assumed = MaskedModel::new(scenario, schedule, &ones)?;
    let mu = truth.mean(true_eta.alpha(), &true_eta.p)?;
    let r = &mu - assumed.mean(pseudo.alpha(), &pseudo.p)?;
    let d = assumed.jacobian(pseudo.alpha(), &pseudo.p)?;
    let d2 = assumed.second_derivatives(pseudo.alpha(), &pseudo.p)?;
    let dhd = d.adjoint() * &d;
    let dh_r = d.adjoint() * &r;
    let a = DMatrix::from_fn(NUM_PARAMS, NUM_PARAMS, |i, j| {
        2.0 / n0 * (r.dotc(&d2[i * NUM_PARAMS + j]).re - dhd[(i, j)].re)
    });
    let b = DMatrix::from_fn(NUM_PARAMS, NUM_PARAMS, |i, j| {
        2.0 / n0 * dhd[(i, j)].re + 4.0 / (n0 * n0) * dh_r[i].re * dh_r[j].re
    });
    let stat = stationarity(&d, &r, mu.norm().max(f64::MIN_POSITIVE));
    Ok(McrbMatrices {
        a: symmetrize(&a),
        b: symmetrize(&b),
        stationarity: stat,
        stationary: stat < STATIONARITY_TOLERANCE,
    })
}

/// `A^{-1} B A^{-1}`.
pub fn mcrb(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.shape() != b.shape() {
        return Err(Error::Dimension("A and B must be square and of equal size".into()));
    }
    // -A is the assumed-model information at the pseudo-true point
    let neg_inv = invert_information(&(-a), "MCRB matrix A").or_else(|_| {
        a.clone().lu().try_inverse().map(|inv| -inv).ok_or_else(|| Error::Singular("MCRB matrix A".into()))
    })?;
    Ok(symmetrize(&(&neg_inv * b * &neg_inv)))
}

/// `LB = MCRB + (eta_true - eta_0)(eta_true - eta_0)^T` and its position trace (m²).
pub fn lower_bound(mcrb_matrix: &DMatrix<f64>, pseudo: &ParamVector, true_eta: &ParamVector) -> (DMatrix<f64>, f64) {
    let bias = true_eta.to_vector() - pseudo.to_vector();
    let lb = mcrb_matrix + &bias * bias.transpose();
    let pos = position_trace(&lb);
    (lb, pos)
}

/// All bounds for one scenario, schedule and failure realization.
pub fn compute_bounds(
    scenario: &Scenario,
    schedule: &PhaseSchedule,
    mask: &FailureMask,
    grid: &GridSpec,
) -> Result<BoundReport> {
    let eta = scenario.true_params();
    let crb_perfect_pos = crb_perfect(&eta, mask, scenario, schedule)?;
    let crb_knownloc_pos = crb_knownloc(&ExtendedParamVector::from_mask(eta, mask), scenario, schedule)?;
    let pseudo = pseudo_true(&eta, mask, scenario, schedule, grid)?;
    let mats = mcrb_matrices(&pseudo.eta, &eta, mask, scenario, schedule)?;
    let mcrb_matrix = mcrb(&mats.a, &mats.b)?;
    let (lb_matrix, lb_pos) = lower_bound(&mcrb_matrix, &pseudo.eta, &eta);
    Ok(BoundReport {
        crb_perfect_pos,
        crb_knownloc_pos,
        mcrb_matrix,
        pseudo_true: pseudo.eta,
        lb_matrix,
        lb_pos,
        pseudo_true_non_unique: pseudo.non_unique,
        stationary: mats.stationary,
    })
}
