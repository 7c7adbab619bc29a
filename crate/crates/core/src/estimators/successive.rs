use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lasso::spectral_norm_sq;
use super::localize::Localizer;
use super::{Estimate, GridSpec, TraceEntry};
use crate::error::{Error, Result};
use crate::scene::{fault_system_matrix, log_failure_coeff_pdf, PhaseSchedule, Scenario};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Current estimate entering one round of hypothesis testing.
///
/// Hypotheses are formed relative to `i_prev`: entries of `m_prev` inside
/// that set are kept, every other entry is taken as 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionState {
    pub alpha: Complex64,
    pub p: Vector3<f64>,
    pub m_prev: DVector<Complex64>,
    /// Sorted element indices already declared failing.
    pub i_prev: Vec<usize>,
}

impl DetectionState {
    fn base_mask(&self) -> DVector<Complex64> {
        let mut m = DVector::from_element(self.m_prev.len(), ONE);
        for &n in &self.i_prev {
            m[n] = self.m_prev[n];
        }
        m
    }
}

/// Cost of hypothesis `k`: 0 means "no further failure", `k >= 1` means
/// element `k - 1` fails with coefficient `zeta_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCost {
    pub k: usize,
    pub cost: f64,
    pub zeta_hat: Option<Complex64>,
}

/// Output of [`joint_zeta_ls`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointLs {
    pub zeta: DVector<Complex64>,
    /// The restricted columns were numerically dependent; `zeta` is the
    /// minimum-norm solution.
    pub rank_deficient: bool,
}

/// How a candidate coefficient is fitted for each hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaRule {
    /// Plain least squares, ignoring the coefficient prior.
    #[default]
    LeastSquares,
    /// Interior local minimizer of the LS term plus `-log f(zeta)` when it
    /// exists, clipped to the unit disk; LS otherwise. The global problem is
    /// unbounded below at `zeta -> 0`, so only the local mode is meaningful.
    PriorLocalMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuccessiveOptions {
    /// Cap `C` on localization / coefficient alternations per detection.
    pub alternations: usize,
    /// Cap on detections; `None` uses [`max_iterations_for`].
    pub max_iterations: Option<usize>,
    /// Position change (m) that ends the alternation.
    pub epsilon: f64,
    pub zeta_rule: ZetaRule,
}

impl Default for SuccessiveOptions {
    fn default() -> Self {
        Self { alternations: 5, max_iterations: None, epsilon: 1e-3, zeta_rule: ZetaRule::LeastSquares }
    }
}

/// `ceil(2 N p_fail)`, capped at `N`.
pub fn max_iterations_for(num_elements: usize, p_fail: f64) -> usize {
    let raw = (2.0 * num_elements as f64 * p_fail - 1e-9).ceil();
    if raw.is_nan() || raw <= 0.0 {
        0
    } else {
        (raw as usize).min(num_elements)
    }
}

/// Precomputed quantities shared by all hypotheses of one round.
struct Bank {
    a: DMatrix<Complex64>,
    base: DVector<Complex64>,
    /// `y - A m0`
    r: DVector<Complex64>,
    r_norm_sq: f64,
    i_prev: Vec<usize>,
}

impl Bank {
    fn new(
        state: &DetectionState,
        y: &DVector<Complex64>,
        schedule: &PhaseSchedule,
        scenario: &Scenario,
    ) -> Result<Self> {
        let a = fault_system_matrix(state.alpha, &state.p, scenario, schedule)?;
        let n = a.ncols();
        if y.len() != a.nrows() {
            return Err(Error::Dimension(format!("observation has {} samples, expected {}", y.len(), a.nrows())));
        }
        if state.m_prev.len() != n {
            return Err(Error::Dimension(format!("mask has {} entries, expected {n}", state.m_prev.len())));
        }
        check_index_set(&state.i_prev, n)?;
        let base = state.base_mask();
        let r = y - &a * &base;
        let r_norm_sq = r.norm_squared();
        Ok(Self { a, base, r, r_norm_sq, i_prev: state.i_prev.clone() })
    }

    fn check_hypothesis(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.a.ncols() {
            return Err(Error::InvalidParameter(format!("hypothesis {k} does not name an element")));
        }
        let n = k - 1;
        if self.i_prev.contains(&n) {
            return Err(Error::InvalidParameter(format!("element {n} is already declared failing")));
        }
        Ok(n)
    }

    /// `(a_n^H r, ||a_n||²)`
    fn projection(&self, n: usize) -> Result<(Complex64, f64)> {
        let col = self.a.column(n);
        let energy = col.norm_squared();
        if energy == 0.0 {
            return Err(Error::Singular(format!("column {n} of the system matrix is zero")));
        }
        Ok((col.dotc(&self.r), energy))
    }

    /// Closed-form LS coefficient for element `n`. Since `m0_n = 1`,
    /// `y_tilde = r + a_n`.
    fn zeta_ls(&self, n: usize) -> Result<Complex64> {
        let (corr, energy) = self.projection(n)?;
        Ok(ONE + corr / energy)
    }

    /// `||y - A m_k||²` for `m_k = m0` with entry `n` replaced by `zeta`.
    fn residual_with(&self, n: usize, zeta: Complex64) -> f64 {
        let shift = zeta - self.base[n];
        let col = self.a.column(n);
        self.r.iter().zip(col.iter()).map(|(r, c)| (r - shift * c).norm_sqr()).sum()
    }
}

fn check_index_set(indices: &[usize], n: usize) -> Result<()> {
    for (i, &k) in indices.iter().enumerate() {
        if k >= n {
            return Err(Error::InvalidParameter(format!("element index {k} out of range for {n} elements")));
        }
        if indices[..i].contains(&k) {
            return Err(Error::InvalidParameter(format!("element index {k} repeated")));
        }
    }
    Ok(())
}

fn check_probability(p_fail: f64) -> Result<()> {
    if !(p_fail > 0.0 && p_fail < 1.0) {
        return Err(Error::InvalidParameter(format!("p_fail must lie in (0, 1), got {p_fail}")));
    }
    Ok(())
}

/// LS coefficient of hypothesis `k` against `y` with every other element
/// weighted by its hypothesis mask value.
pub fn candidate_zeta(
    k: usize,
    state: &DetectionState,
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
) -> Result<Complex64> {
    let bank = Bank::new(state, y, schedule, scenario)?;
    let n = bank.check_hypothesis(k)?;
    bank.zeta_ls(n)
}

/// Log prior of the hypothesis mask, without the `sum_{n in I} log f(m_n)`
/// term shared by every hypothesis of a round.
fn log_prior_own(k: usize, zeta: Option<Complex64>, failing: usize, n: usize, p_fail: f64) -> f64 {
    let log_ok = (-p_fail).ln_1p();
    let log_fail = p_fail.ln();
    let working = (n - failing) as f64;
    match (k, zeta) {
        (0, _) => working * log_ok + failing as f64 * log_fail,
        (_, Some(z)) => (working - 1.0) * log_ok + (failing + 1) as f64 * log_fail + log_failure_coeff_pdf(z),
        (_, None) => f64::NEG_INFINITY,
    }
}

fn cost_from(residual: f64, noise_psd: f64, log_prior: f64) -> f64 {
    if log_prior == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        residual / noise_psd - log_prior
    }
}

/// Hybrid ML/MAP cost `||y - A m_k||²/N0 - log Pr(m_k)` of hypothesis `k`.
///
/// A coefficient outside `0 < |zeta| <= 1`, or a previously detected
/// coefficient outside it, has zero prior density and yields `+inf`.
pub fn hypothesis_cost(
    k: usize,
    zeta_k: Option<Complex64>,
    state: &DetectionState,
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
    p_fail: f64,
) -> Result<HypothesisCost> {
    check_probability(p_fail)?;
    let bank = Bank::new(state, y, schedule, scenario)?;
    let n = bank.a.ncols();
    let shared: f64 = state.i_prev.iter().map(|&i| log_failure_coeff_pdf(state.m_prev[i])).sum();
    let (residual, zeta_hat) = if k == 0 {
        (bank.r_norm_sq, None)
    } else {
        let idx = bank.check_hypothesis(k)?;
        let z = zeta_k.ok_or_else(|| Error::InvalidParameter(format!("hypothesis {k} needs a coefficient")))?;
        (bank.residual_with(idx, z), Some(z))
    };
    let prior = log_prior_own(k, zeta_hat, state.i_prev.len(), n, p_fail) + shared;
    Ok(HypothesisCost { k, cost: cost_from(residual, scenario.noise_psd, prior), zeta_hat })
}

fn fit_zeta(bank: &Bank, n: usize, rule: ZetaRule, noise_psd: f64) -> Result<Complex64> {
    let ls = bank.zeta_ls(n)?;
    match rule {
        ZetaRule::LeastSquares => Ok(ls),
        ZetaRule::PriorLocalMode => {
            // minimize w (rho - |ls|)² + log rho over rho, phase fixed to arg(ls)
            let w = bank.a.column(n).norm_squared() / noise_psd;
            let a = ls.norm();
            let disc = a * a - 2.0 / w;
            if disc < 0.0 {
                return Ok(ls);
            }
            let rho = ((a + disc.sqrt()) / 2.0).min(1.0);
            Ok(Complex64::from_polar(rho, ls.arg()))
        }
    }
}

/// Exact argmin over hypothesis 0 and every element outside `I_prev`;
/// the lowest index wins ties.
fn select(bank: &Bank, p_fail: f64, noise_psd: f64, rule: ZetaRule) -> Result<usize> {
    let n = bank.a.ncols();
    let failing = bank.i_prev.len();
    let mut best = 0;
    let mut best_cost = cost_from(bank.r_norm_sq, noise_psd, log_prior_own(0, None, failing, n, p_fail));
    for idx in 0..n {
        if bank.i_prev.contains(&idx) {
            continue;
        }
        let zeta = fit_zeta(bank, idx, rule, noise_psd)?;
        let prior = log_prior_own(idx + 1, Some(zeta), failing, n, p_fail);
        let cost = cost_from(bank.residual_with(idx, zeta), noise_psd, prior);
        if cost < best_cost {
            best_cost = cost;
            best = idx + 1;
        }
    }
    Ok(best)
}

/// `(A_I, y - sum_{n not in I} a_n)`
fn restricted_problem(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    indices: &[usize],
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let mut target = y.clone();
    for n in 0..a.ncols() {
        if !indices.contains(&n) {
            target -= a.column(n);
        }
    }
    (a.select_columns(indices), target)
}

fn joint_ls_with(a: &DMatrix<Complex64>, y: &DVector<Complex64>, indices: &[usize]) -> Result<JointLs> {
    check_index_set(indices, a.ncols())?;
    if y.len() != a.nrows() {
        return Err(Error::Dimension(format!("observation has {} samples, expected {}", y.len(), a.nrows())));
    }
    if indices.is_empty() {
        return Ok(JointLs { zeta: DVector::zeros(0), rank_deficient: false });
    }
    let (sub, target) = restricted_problem(a, y, indices);
    let rows = sub.nrows();
    let svd = sub.svd(true, true);
    let max = svd.singular_values.max();
    let cutoff = max * 1e-12;
    let rank_deficient = indices.len() > rows || svd.singular_values.iter().any(|&s| s <= cutoff);
    let zeta = svd.solve(&target, cutoff).map_err(|e| Error::Singular(e.to_string()))?;
    Ok(JointLs { zeta, rank_deficient })
}

/// Joint LS fit of the coefficients in `I` against `y` minus the
/// contribution of every working element.
pub fn joint_zeta_ls(
    indices: &[usize],
    alpha: Complex64,
    p: &Vector3<f64>,
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
) -> Result<JointLs> {
    let a = fault_system_matrix(alpha, p, scenario, schedule)?;
    joint_ls_with(&a, y, indices)
}

fn clip_to_disk(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 1.0 {
        z / r
    } else {
        z
    }
}

fn unit_disk_with(a: &DMatrix<Complex64>, y: &DVector<Complex64>, indices: &[usize]) -> Result<DVector<Complex64>> {
    let ls = joint_ls_with(a, y, indices)?.zeta;
    if ls.iter().all(|z| z.norm() <= 1.0) {
        return Ok(ls);
    }
    let (sub, target) = restricted_problem(a, y, indices);
    let mut zeta = ls.map(clip_to_disk);
    let l = spectral_norm_sq(&sub);
    if l == 0.0 {
        return Ok(zeta);
    }
    let gram = sub.adjoint() * &sub;
    let corr = sub.adjoint() * &target;
    let objective = |z: &DVector<Complex64>| (&target - &sub * z).norm_squared();
    let mut f = objective(&zeta);
    for _ in 0..1_000_000 {
        let grad = &corr - &gram * &zeta;
        let next = (&zeta + grad / Complex64::new(l, 0.0)).map(clip_to_disk);
        let f_next = objective(&next);
        if f_next > f {
            break;
        }
        let change = f - f_next;
        zeta = next;
        f = f_next;
        if change <= 1e-10 * f.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(zeta)
}

/// `argmin ||y_breve - A_I zeta||²` subject to `|zeta_n| <= 1`, by projected
/// gradient with step `1/L` started from the clipped LS solution.
pub fn unit_disk_refine(
    indices: &[usize],
    alpha: Complex64,
    p: &Vector3<f64>,
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
) -> Result<DVector<Complex64>> {
    let a = fault_system_matrix(alpha, p, scenario, schedule)?;
    unit_disk_with(&a, y, indices)
}

fn mask_from(n: usize, indices: &[usize], zeta: &DVector<Complex64>) -> DVector<Complex64> {
    let mut m = DVector::from_element(n, ONE);
    for (i, &k) in indices.iter().enumerate() {
        m[k] = zeta[i];
    }
    m
}

/// Greedy detection of failing elements, one per outer iteration, with
/// alternating coefficient refit and re-localization after each detection.
pub fn successive_jlfd(
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    scenario: &Scenario,
    grid: &GridSpec,
    p_fail: f64,
    opts: &SuccessiveOptions,
) -> Result<Estimate> {
    let n = scenario.num_elements();
    if !(0.0..1.0).contains(&p_fail) {
        return Err(Error::InvalidParameter(format!("p_fail must lie in [0, 1), got {p_fail}")));
    }
    if !(opts.epsilon >= 0.0) {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    let i_max = opts.max_iterations.unwrap_or_else(|| max_iterations_for(n, p_fail)).min(n);
    let ones = DVector::from_element(n, ONE);
    let initial = Localizer::new(scenario, schedule, &ones, grid)?.run(y, None)?;
    let mut state = DetectionState { alpha: initial.alpha, p: initial.p, m_prev: ones.clone(), i_prev: Vec::new() };
    let mut trace = vec![TraceEntry { iteration: 0, p_hat: initial.p, m_hat: ones.clone(), selected: None }];
    if i_max > 0 {
        check_probability(p_fail)?;
    }

    let mut iterations = 0;
    while iterations < i_max {
        iterations += 1;
        let prev_set = state.i_prev.clone();
        let mut cur = state.clone();
        let mut accepted = None;
        for step in 1..=opts.alternations.max(1) {
            let probe = DetectionState { i_prev: prev_set.clone(), ..cur.clone() };
            let bank = Bank::new(&probe, y, schedule, scenario)?;
            let k_hat = select(&bank, p_fail, scenario.noise_psd, opts.zeta_rule)?;
            if k_hat == 0 {
                if step > 1 {
                    // drop the coefficient of the withdrawn detection
                    cur.m_prev = probe.base_mask();
                    cur.i_prev = prev_set.clone();
                    state = cur.clone();
                }
                break;
            }
            let mut set = prev_set.clone();
            set.push(k_hat - 1);
            set.sort_unstable();
            let zeta = joint_ls_with(&bank.a, y, &set)?.zeta;
            let mask = mask_from(n, &set, &zeta);
            let loc = Localizer::new(scenario, schedule, &mask, grid)?.run(y, Some(&cur.p))?;
            let moved = (loc.p - cur.p).norm();
            cur = DetectionState { alpha: loc.alpha, p: loc.p, m_prev: mask, i_prev: set };
            if moved <= opts.epsilon || step >= opts.alternations {
                accepted = Some((cur.clone(), k_hat));
                break;
            }
        }
        let Some((next, k)) = accepted else {
            break;
        };
        trace.push(TraceEntry { iteration: iterations, p_hat: next.p, m_hat: next.m_prev.clone(), selected: Some(k) });
        state = next;
    }

    if state.i_prev.is_empty() {
        let mut est = Estimate::from_localization(&initial, ones, Vec::new());
        est.trace = trace;
        est.iterations = iterations;
        return Ok(est);
    }
    let a = fault_system_matrix(state.alpha, &state.p, scenario, schedule)?;
    let zeta = unit_disk_with(&a, y, &state.i_prev)?;
    let mask = mask_from(n, &state.i_prev, &zeta);
    let fin = Localizer::new(scenario, schedule, &mask, grid)?.run(y, Some(&state.p))?;
    let mut est = Estimate::from_localization(&fin, mask, state.i_prev);
    est.trace = trace;
    est.iterations = iterations;
    Ok(est)
}
