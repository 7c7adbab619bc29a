use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{Error, Result};
use crate::scene::{MaskedModel, PhaseSchedule, Scenario, NUM_PARAMS};

/// Result of a fixed-mask localization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub alpha: Complex64,
    pub p: Vector3<f64>,
    /// `||y - alpha h(p)||²`
    pub residual: f64,
    /// Several coarse cells attained the minimum; the lowest index was kept.
    pub tie: bool,
    /// Concentrated-residual evaluations spent on the grid stages.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Spherical {
    d: f64,
    az: f64,
    el: f64,
}

impl Spherical {
    fn to_point(self, center: &Vector3<f64>) -> Vector3<f64> {
        let (se, ce) = self.el.sin_cos();
        let (sa, ca) = self.az.sin_cos();
        center + self.d * Vector3::new(ce * ca, ce * sa, se)
    }

    fn from_point(p: &Vector3<f64>, center: &Vector3<f64>) -> Self {
        let v = p - center;
        let d = v.norm();
        let el = if d > 0.0 { (v.z / d).clamp(-1.0, 1.0).asin() } else { 0.0 };
        Self { d, az: v.y.atan2(v.x), el }
    }

    fn inside(&self, g: &GridSpec) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo - 1e-12 && v <= hi + 1e-12;
        within(self.d, g.distance_range) && within(self.az, g.azimuth_range) && within(self.el, g.elevation_range)
    }
}

fn linspace(lo: f64, hi: f64, k: usize, i: usize) -> f64 {
    if k <= 1 {
        return 0.5 * (lo + hi);
    }
    lo + (hi - lo) * i as f64 / (k - 1) as f64
}

/// Grid localizer for one assumed mask; reusable across observations.
pub struct Localizer<'a> {
    model: MaskedModel<'a>,
    grid: GridSpec,
}

struct Scan<'y> {
    y: &'y DVector<Complex64>,
    y_energy: f64,
    tol: f64,
    h: DVector<Complex64>,
    evaluations: usize,
}

impl Scan<'_> {
    /// Concentrated residual `||y||² - |h^H y|² / ||h||²`, `None` if undefined at `p`.
    fn residual(&mut self, model: &MaskedModel, p: &Vector3<f64>) -> Option<f64> {
        self.evaluations += 1;
        if !model.response_into(p, &mut self.h) {
            return None;
        }
        let hh = self.h.norm_squared();
        if !(hh > 0.0) {
            return None;
        }
        let hy = self.h.dotc(self.y);
        Some((self.y_energy - hy.norm_sqr() / hh).max(0.0))
    }
}

#[derive(Debug, Clone, Copy)]
struct Incumbent {
    at: Spherical,
    residual: f64,
}

impl Incumbent {
    /// Strict improvement beyond the tie tolerance.
    fn offer(&mut self, at: Spherical, r: f64, tol: f64) -> bool {
        if r < self.residual - tol {
            self.at = at;
            self.residual = r;
            true
        } else {
            false
        }
    }
}

impl<'a> Localizer<'a> {
    pub fn new(
        scenario: &'a Scenario,
        schedule: &PhaseSchedule,
        mask: &DVector<Complex64>,
        grid: &GridSpec,
    ) -> Result<Self> {
        grid.validate()?;
        Ok(Self { model: MaskedModel::new(scenario, schedule, mask)?, grid: *grid })
    }

    pub fn model(&self) -> &MaskedModel<'a> {
        &self.model
    }

    /// Grid search, refinement and a local polish; `hint` is scored as an
    /// extra candidate so the result is never worse than it.
    pub fn run(&self, y: &DVector<Complex64>, hint: Option<&Vector3<f64>>) -> Result<Localization> {
        let t = self.model.num_transmissions();
        if y.len() != t {
            return Err(Error::Dimension(format!("observation has {} samples, expected {t}", y.len())));
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("observation".into()));
        }
        let g = &self.grid;
        let k = g.points_per_axis;
        let center = self.model.scenario().ris_center;
        let y_energy = y.norm_squared();
        let mut scan = Scan { y, y_energy, tol: 1e-12 * y_energy, h: DVector::zeros(t), evaluations: 0 };

        // coarse pass, slice-major then azimuth then elevation
        let mut best: Option<Incumbent> = None;
        let mut tie = false;
        let slices = g.distance_slices;
        let (d0, d1) = g.distance_range;
        for s in 0..slices {
            let d = d0 + (d1 - d0) * (s as f64 + 0.5) / slices as f64;
            for ia in 0..k {
                let az = linspace(g.azimuth_range.0, g.azimuth_range.1, k, ia);
                for ie in 0..k {
                    let el = linspace(g.elevation_range.0, g.elevation_range.1, k, ie);
                    let at = Spherical { d, az, el };
                    let Some(r) = scan.residual(&self.model, &at.to_point(&center)) else {
                        continue;
                    };
                    match best.as_mut() {
                        None => best = Some(Incumbent { at, residual: r }),
                        Some(b) => {
                            if b.offer(at, r, scan.tol) {
                                tie = false;
                            } else if r <= b.residual + scan.tol {
                                tie = true;
                            }
                        }
                    }
                }
            }
        }
        let Some(mut best) = best else {
            return Err(Error::NonIdentifiable("assumed mask yields a zero response on every grid point".into()));
        };
        if y_energy == 0.0 {
            let p = best.at.to_point(&center);
            return Ok(Localization {
                alpha: Complex64::new(0.0, 0.0),
                p,
                residual: 0.0,
                tie: true,
                evaluations: scan.evaluations,
            });
        }

        if let Some(h) = hint {
            let at = Spherical::from_point(h, &center);
            if at.inside(g) {
                if let Some(r) = scan.residual(&self.model, h) {
                    best.offer(at, r, scan.tol);
                }
            }
        }

        let scan_distance = |scan: &mut Scan, best: &mut Incumbent, lo: f64, hi: f64| {
            let base = best.at;
            for i in 0..k {
                let at = Spherical { d: linspace(lo, hi, k, i), ..base };
                if !at.inside(g) {
                    continue;
                }
                if let Some(r) = scan.residual(&self.model, &at.to_point(&center)) {
                    best.offer(at, r, scan.tol);
                }
            }
        };
        scan_distance(&mut scan, &mut best, d0, d1);

        let mut wd = d1 - d0;
        let mut wa = g.azimuth_range.1 - g.azimuth_range.0;
        let mut we = g.elevation_range.1 - g.elevation_range.0;
        for _ in 0..g.refine_levels {
            wd /= 10.0;
            wa /= 10.0;
            we /= 10.0;
            let c = best.at;
            for ia in 0..k {
                let az = linspace(c.az - wa / 2.0, c.az + wa / 2.0, k, ia);
                for ie in 0..k {
                    let el = linspace(c.el - we / 2.0, c.el + we / 2.0, k, ie);
                    let at = Spherical { d: c.d, az, el };
                    if !at.inside(g) {
                        continue;
                    }
                    if let Some(r) = scan.residual(&self.model, &at.to_point(&center)) {
                        best.offer(at, r, scan.tol);
                    }
                }
            }
            let c = best.at;
            scan_distance(&mut scan, &mut best, c.d - wd / 2.0, c.d + wd / 2.0);
        }

        let p = best.at.to_point(&center);
        let h = self.model.response(&p)?;
        let alpha = h.dotc(y) / h.norm_squared();
        let fit = refine(&self.model, y, alpha, p, 100, Some((g, &center)))?;
        Ok(Localization { alpha: fit.0, p: fit.1, residual: fit.2, tie, evaluations: scan.evaluations })
    }
}

/// Approximate minimizer of `||y - alpha S (Phi^T ⊙ 1 m^T) b(p)||²` over `(alpha, p)`.
pub fn localize_fixed_mask(
    y: &DVector<Complex64>,
    schedule: &PhaseSchedule,
    mask_assumed: &DVector<Complex64>,
    grid: &GridSpec,
    scenario: &Scenario,
) -> Result<Localization> {
    Localizer::new(scenario, schedule, mask_assumed, grid)?.run(y, None)
}

/// Damped Newton polish of `||y - mu(eta)||²` from `(alpha, p)`.
///
/// Uses the exact Hessian `2 Re{D^H D} - 2 Re{r^H d2 mu}` with
/// Levenberg-Marquardt damping and only accepts cost decreases, so the
/// returned cost never exceeds the starting one. Returns `(alpha, p, cost)`.
pub fn local_refine(
    model: &MaskedModel,
    y: &DVector<Complex64>,
    alpha: Complex64,
    p: Vector3<f64>,
    max_iter: usize,
) -> Result<(Complex64, Vector3<f64>, f64)> {
    refine(model, y, alpha, p, max_iter, None)
}

/// [`local_refine`] restricted to the search region of `grid`: steps that
/// leave it are rejected like cost increases.
pub fn local_refine_within(
    model: &MaskedModel,
    y: &DVector<Complex64>,
    alpha: Complex64,
    p: Vector3<f64>,
    max_iter: usize,
    grid: &GridSpec,
) -> Result<(Complex64, Vector3<f64>, f64)> {
    let center = model.scenario().ris_center;
    refine(model, y, alpha, p, max_iter, Some((grid, &center)))
}

fn refine(
    model: &MaskedModel,
    y: &DVector<Complex64>,
    alpha: Complex64,
    p: Vector3<f64>,
    max_iter: usize,
    region: Option<(&GridSpec, &Vector3<f64>)>,
) -> Result<(Complex64, Vector3<f64>, f64)> {
    let cost_at = |a: Complex64, q: &Vector3<f64>| -> Option<f64> {
        if let Some((g, center)) = region {
            if !Spherical::from_point(q, center).inside(g) {
                return None;
            }
        }
        model.mean(a, q).ok().map(|m| (y - m).norm_squared())
    };
    let mut alpha = alpha;
    let mut p = p;
    let Some(mut cost) = cost_at(alpha, &p) else {
        return Err(Error::DegenerateGeometry {
            what: "refinement start outside the model domain".into(),
            distance: 0.0,
        });
    };
    let mut lambda = 1e-6;
    for _ in 0..max_iter {
        let mean = model.mean(alpha, &p)?;
        let r = y - mean;
        let d = model.jacobian(alpha, &p)?;
        let d2 = model.second_derivatives(alpha, &p)?;
        let dh_r = d.adjoint() * &r;
        let grad = DVector::from_fn(NUM_PARAMS, |i, _| -2.0 * dh_r[i].re);
        let dhd = d.adjoint() * &d;
        let hess = DMatrix::from_fn(NUM_PARAMS, NUM_PARAMS, |i, j| {
            2.0 * dhd[(i, j)].re - 2.0 * r.dotc(&d2[i * NUM_PARAMS + j]).re
        });
        let hess = (&hess + hess.transpose()) * 0.5;
        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = hess.clone();
            for i in 0..NUM_PARAMS {
                damped[(i, i)] += lambda * hess[(i, i)].abs().max(1e-300);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let a_new = alpha + Complex64::new(step[0], step[1]);
            let p_new = p + Vector3::new(step[2], step[3], step[4]);
            match cost_at(a_new, &p_new) {
                Some(c) if c < cost => {
                    let small = (step[2] * step[2] + step[3] * step[3] + step[4] * step[4]).sqrt()
                        < 1e-14 * (1.0 + p.norm())
                        && (step[0].hypot(step[1])) < 1e-14 * (1.0 + alpha.norm());
                    alpha = a_new;
                    p = p_new;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = !small;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            break;
        }
    }
    Ok((alpha, p, cost))
}
