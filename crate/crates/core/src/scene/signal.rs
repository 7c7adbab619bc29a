use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{combined_response, steering_vector, FailureMask, PhaseSchedule, Scenario};
use crate::error::{Error, Result};

/// Received pilots `y`, one complex sample per transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: DVector<Complex64>,
}

impl Observation {
    pub fn new(y: DVector<Complex64>) -> Self {
        Self { y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `A(alpha, p) = alpha S (Phi^T ⊙ 1 b^T(p))`, a `T × N` matrix with
/// entries `alpha s_t [phi_t]_n [b(p)]_n`, so that `A m` is the noiseless
/// received signal under mask `m`.
pub fn fault_system_matrix(
    alpha: Complex64,
    p: &Vector3<f64>,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<DMatrix<Complex64>> {
    schedule.check_against(scenario)?;
    let b = combined_response(p, scenario)?;
    Ok(system_matrix_from_response(alpha, &b, scenario, schedule))
}

pub(crate) fn system_matrix_from_response(
    alpha: Complex64,
    b: &DVector<Complex64>,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> DMatrix<Complex64> {
    let phi = &schedule.phases;
    DMatrix::from_fn(scenario.num_transmissions(), scenario.num_elements(), |t, n| {
        alpha * scenario.pilots[t] * phi[(n, t)] * b[n]
    })
}

/// Noiseless mean `alpha S (Phi^T ⊙ 1 m^T) b(p)`.
pub fn noiseless_mean(
    alpha: Complex64,
    p: &Vector3<f64>,
    mask: &DVector<Complex64>,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
) -> Result<DVector<Complex64>> {
    if mask.len() != scenario.num_elements() {
        return Err(Error::Dimension(format!(
            "mask has {} entries, scenario has {} elements",
            mask.len(),
            scenario.num_elements()
        )));
    }
    Ok(fault_system_matrix(alpha, p, scenario, schedule)? * mask)
}

/// i.i.d. `CN(0, n0)` samples.
pub(crate) fn complex_noise<R: Rng + ?Sized>(len: usize, n0: f64, rng: &mut R) -> DVector<Complex64> {
    let sigma = (n0 / 2.0).sqrt();
    DVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(sigma * re, sigma * im)
    })
}

fn observe<R: Rng + ?Sized>(
    alpha: Complex64,
    scenario: &Scenario,
    schedule: &PhaseSchedule,
    mask: &FailureMask,
    rng: &mut R,
) -> Result<Observation> {
    let mean = noiseless_mean(alpha, &scenario.ue_position, &mask.mask, scenario, schedule)?;
    let noise = complex_noise(mean.len(), scenario.noise_psd, rng);
    Ok(Observation::new(mean + noise))
}

/// Draws `y = A(alpha_true, p_true) m + n` with `n ~ CN(0, N0 I)`.
pub fn synthesize<R: Rng + ?Sized>(
    scenario: &Scenario,
    schedule: &PhaseSchedule,
    mask: &FailureMask,
    rng: &mut R,
) -> Result<Observation> {
    observe(scenario.channel_gain, scenario, schedule, mask, rng)
}

/// Noise-free variant of [`synthesize`].
pub fn synthesize_noiseless(scenario: &Scenario, schedule: &PhaseSchedule, mask: &FailureMask) -> Result<Observation> {
    let mean = noiseless_mean(scenario.channel_gain, &scenario.ue_position, &mask.mask, scenario, schedule)?;
    Ok(Observation::new(mean))
}

/// One draw of the Rician RIS-UE channel with a LoS BS-RIS link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicianChannelRealization {
    pub alpha_br: Complex64,
    pub alpha_ru: Complex64,
    pub k_factor: f64,
    pub h_nlos: DVector<Complex64>,
    /// Drop the NLoS term entirely (the `K -> inf` limit).
    pub exact_los: bool,
}

impl RicianChannelRealization {
    /// Draws `h_nlos ~ CN(0, I)` of length `num_elements`.
    pub fn draw<R: Rng + ?Sized>(
        alpha_br: Complex64,
        alpha_ru: Complex64,
        k_factor: f64,
        num_elements: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !(k_factor >= 0.0) || k_factor.is_nan() {
            return Err(Error::InvalidParameter(format!("Rician K must be >= 0, got {k_factor}")));
        }
        Ok(Self { alpha_br, alpha_ru, k_factor, h_nlos: complex_noise(num_elements, 1.0, rng), exact_los: false })
    }

    /// Pure line-of-sight channel.
    pub fn exact_los(alpha_br: Complex64, alpha_ru: Complex64, num_elements: usize) -> Self {
        Self { alpha_br, alpha_ru, k_factor: f64::INFINITY, h_nlos: DVector::zeros(num_elements), exact_los: true }
    }

    /// RIS-UE channel `alpha_ru (sqrt(K/(K+1)) a(p) + sqrt(1/(K+1)) h_nlos)`.
    pub fn ris_ue_channel(&self, p: &Vector3<f64>, scenario: &Scenario) -> Result<DVector<Complex64>> {
        let a = steering_vector(p, scenario)?;
        if self.exact_los {
            return Ok(a * self.alpha_ru);
        }
        let k = self.k_factor;
        let los = (k / (k + 1.0)).sqrt();
        let nlos = (1.0 / (k + 1.0)).sqrt();
        Ok((a * Complex64::new(los, 0.0) + &self.h_nlos * Complex64::new(nlos, 0.0)) * self.alpha_ru)
    }
}

/// Draws `y_t = h_ru^T diag(phi_t ⊙ m) h_br s_t + n_t` under a Rician RIS-UE link.
///
/// With `exact_los` set this delegates to [`synthesize`]'s code path with
/// `alpha = alpha_br alpha_ru`, so both produce the same samples for the same
/// random state.
pub fn synthesize_rician<R: Rng + ?Sized>(
    scenario: &Scenario,
    schedule: &PhaseSchedule,
    mask: &FailureMask,
    realization: &RicianChannelRealization,
    rng: &mut R,
) -> Result<Observation> {
    schedule.check_against(scenario)?;
    if realization.h_nlos.len() != scenario.num_elements() {
        return Err(Error::Dimension("NLoS channel length differs from N".into()));
    }
    if realization.exact_los {
        return observe(realization.alpha_br * realization.alpha_ru, scenario, schedule, mask, rng);
    }
    let h_br = steering_vector(&scenario.bs_position, scenario)? * realization.alpha_br;
    let h_ru = realization.ris_ue_channel(&scenario.ue_position, scenario)?;
    let g = h_ru.component_mul(&h_br).component_mul(&mask.mask);
    let mean =
        DVector::from_fn(scenario.num_transmissions(), |t, _| scenario.pilots[t] * schedule.phases.column(t).dot(&g));
    let noise = complex_noise(mean.len(), scenario.noise_psd, rng);
    Ok(Observation::new(mean + noise))
}

/// Maps `T` coded samples to `T/2` via `(y_{2t-1} - y_{2t}) / 2`.
///
/// Pilots must repeat within each pair for the combined samples to follow
/// the half-length model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalCombiner {
    pub num_transmissions: usize,
}

impl TemporalCombiner {
    pub fn new(num_transmissions: usize) -> Result<Self> {
        if num_transmissions % 2 != 0 {
            return Err(Error::OddTransmissions(num_transmissions));
        }
        Ok(Self { num_transmissions })
    }

    pub fn combine(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if y.len() != self.num_transmissions {
            return Err(Error::Dimension(format!(
                "combiner expects {} samples, got {}",
                self.num_transmissions,
                y.len()
            )));
        }
        Ok(DVector::from_fn(y.len() / 2, |t, _| (y[2 * t] - y[2 * t + 1]) * 0.5))
    }
}

/// Expands a `T/2`-column schedule into `[phi_1, -phi_1, phi_2, -phi_2, ...]`.
pub fn temporal_code(schedule_half: &PhaseSchedule) -> (PhaseSchedule, TemporalCombiner) {
    let half = schedule_half.phases.ncols();
    let n = schedule_half.phases.nrows();
    let phases = DMatrix::from_fn(n, 2 * half, |i, t| {
        let v = schedule_half.phases[(i, t / 2)];
        if t % 2 == 0 {
            v
        } else {
            -v
        }
    });
    (PhaseSchedule { phases }, TemporalCombiner { num_transmissions: 2 * half })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{sample_failure_mask, steering_vector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (Scenario, PhaseSchedule) {
        let mut s = Scenario::planar(
            2,
            2,
            0.1,
            3,
            Vector3::new(2.0, 1.0, 3.0),
            Vector3::zeros(),
            Vector3::new(0.4, 0.3, 0.8),
            Complex64::new(0.7, -0.2),
            2.0,
            0.5,
        )
        .unwrap();
        s.pilots = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 1.2), Complex64::new(0.9, 0.0)];
        let sched = PhaseSchedule::random(4, 3, &mut ChaCha8Rng::seed_from_u64(1));
        (s, sched)
    }

    #[test]
    fn system_matrix_times_ones_is_failure_free_mean() {
        let s = Scenario::desk_scale();
        let sched = PhaseSchedule::random(64, 16, &mut ChaCha8Rng::seed_from_u64(4));
        let a = fault_system_matrix(s.channel_gain, &s.ue_position, &s, &sched).unwrap();
        let ones = DVector::from_element(64, Complex64::new(1.0, 0.0));
        // failure-free model: alpha S Phi^T b(p)
        let b = combined_response(&s.ue_position, &s).unwrap();
        let direct = DVector::from_fn(16, |t, _| s.channel_gain * s.pilots[t] * sched.phases.column(t).dot(&b));
        assert!((a * ones - direct).norm() < 1e-12);
    }

    #[test]
    fn zero_gain_gives_zero_matrix() {
        let (s, sched) = small();
        let a = fault_system_matrix(Complex64::new(0.0, 0.0), &s.ue_position, &s, &sched).unwrap();
        assert!(a.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn small_instance_matches_per_sample_formula() {
        let (s, sched) = small();
        let mask = DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.3, 0.4),
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.5, 0.1),
        ]);
        let got = noiseless_mean(s.channel_gain, &s.ue_position, &mask, &s, &sched).unwrap();
        let ap = steering_vector(&s.ue_position, &s).unwrap();
        let abs = steering_vector(&s.bs_position, &s).unwrap();
        for t in 0..3 {
            // y_t = alpha a(p)^T diag(gamma_t) a(p_bs) s_t with gamma_t = phi_t ⊙ m
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..4 {
                acc += ap[n] * sched.phases[(n, t)] * mask[n] * abs[n];
            }
            let expect = s.channel_gain * acc * s.pilots[t];
            assert!((got[t] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn noise_variance_matches_n0() {
        let (mut s, sched) = small();
        s.noise_psd = 0.37;
        let mask = FailureMask::ones(4);
        let mean = synthesize_noiseless(&s, &sched, &mask).unwrap().y;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000 / 3 + 1;
        let (mut sum, mut sum_re2, mut count) = (0.0, 0.0, 0usize);
        for _ in 0..draws {
            let y = synthesize(&s, &sched, &mask, &mut rng).unwrap().y;
            for t in 0..3 {
                let e = y[t] - mean[t];
                sum += e.norm_sqr();
                sum_re2 += e.re * e.re;
                count += 1;
            }
        }
        let var = sum / count as f64;
        assert!((var / 0.37 - 1.0).abs() < 0.02, "variance {var}");
        assert!((sum_re2 / count as f64 / 0.185 - 1.0).abs() < 0.02);
    }

    #[test]
    fn rician_vectorized_matches_scalar_loop() {
        let (s, sched) = small();
        let mask = sample_failure_mask(0.5, &mut ChaCha8Rng::seed_from_u64(3), 4).unwrap();
        let real = RicianChannelRealization::draw(
            Complex64::new(0.8, 0.1),
            Complex64::new(-0.4, 0.9),
            3.0,
            4,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let mut quiet = s.clone();
        quiet.noise_psd = 1e-300;
        let y = synthesize_rician(&quiet, &sched, &mask, &real, &mut ChaCha8Rng::seed_from_u64(6)).unwrap().y;
        let ap = steering_vector(&s.ue_position, &s).unwrap();
        let abs = steering_vector(&s.bs_position, &s).unwrap();
        let wl = (3.0f64 / 4.0).sqrt();
        let wn = (1.0f64 / 4.0).sqrt();
        for t in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..4 {
                let h_ru = real.alpha_ru * (ap[n] * wl + real.h_nlos[n] * wn);
                let h_br = real.alpha_br * abs[n];
                acc += h_ru * sched.phases[(n, t)] * mask.mask[n] * h_br;
            }
            assert!((y[t] - acc * s.pilots[t]).norm() < 1e-12);
        }
    }

    #[test]
    fn rician_k_zero_loses_position() {
        let (s, sched) = small();
        let mask = FailureMask::ones(4);
        let real = RicianChannelRealization::draw(
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            0.0,
            4,
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        let mut quiet = s.clone();
        quiet.noise_psd = 1e-300;
        let mut moved = quiet.clone();
        moved.ue_position = Vector3::new(-1.0, 2.0, 0.5);
        let y1 = synthesize_rician(&quiet, &sched, &mask, &real, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().y;
        let y2 = synthesize_rician(&moved, &sched, &mask, &real, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().y;
        assert!((y1 - y2).norm() < 1e-12);
    }

    #[test]
    fn exact_los_is_bit_identical_to_synthesize() {
        let (s, sched) = small();
        let mask = sample_failure_mask(0.5, &mut ChaCha8Rng::seed_from_u64(12), 4).unwrap();
        let (abr, aru) = (Complex64::new(0.6, 0.2), Complex64::new(0.3, -1.1));
        let real = RicianChannelRealization::exact_los(abr, aru, 4);
        let mut matched = s.clone();
        matched.channel_gain = abr * aru;
        let a = synthesize_rician(&s, &sched, &mask, &real, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let b = synthesize(&matched, &sched, &mask, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_k_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = Complex64::new(1.0, 0.0);
        assert!(RicianChannelRealization::draw(one, one, -1.0, 4, &mut rng).is_err());
        assert!(RicianChannelRealization::draw(one, one, f64::NAN, 4, &mut rng).is_err());
    }

    fn coded_scene(t_half: usize) -> (Scenario, PhaseSchedule, PhaseSchedule, TemporalCombiner) {
        let s = Scenario::desk_scale();
        let half = PhaseSchedule::random(64, t_half, &mut ChaCha8Rng::seed_from_u64(30));
        let (full, comb) = temporal_code(&half);
        let mut s_full = s;
        s_full.pilots = vec![s_full.pilots[0]; 2 * t_half];
        (s_full, half, full, comb)
    }

    #[test]
    fn temporal_code_cancels_static_path() {
        let (s, half, full, comb) = coded_scene(8);
        let mask = FailureMask::ones(64);
        let ris = synthesize_noiseless(&s, &full, &mask).unwrap().y;
        let d = Complex64::new(3.7, -2.1);
        let contaminated = DVector::from_fn(16, |t, _| ris[t] + d * s.pilots[t]);
        let out = comb.combine(&contaminated).unwrap();
        let mut s_half = s.clone();
        s_half.pilots.truncate(8);
        let expect = synthesize_noiseless(&s_half, &half, &mask).unwrap().y;
        assert!((out - &expect).norm() / expect.norm() < 1e-12);
        assert!((comb.combine(&ris).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn combined_noise_has_half_variance() {
        let (s, _, full, comb) = coded_scene(4);
        let mask = FailureMask::ones(64);
        let mean = comb.combine(&synthesize_noiseless(&s, &full, &mask).unwrap().y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut acc = 0.0;
        let draws = 25_000;
        for _ in 0..draws {
            let y = comb.combine(&synthesize(&s, &full, &mask, &mut rng).unwrap().y).unwrap();
            acc += (y - &mean).norm_squared();
        }
        let var = acc / (draws * 4) as f64;
        assert!((var / (s.noise_psd / 2.0) - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn combiner_rejects_odd_length() {
        assert!(matches!(TemporalCombiner::new(5), Err(Error::OddTransmissions(5))));
        let comb = TemporalCombiner::new(4).unwrap();
        assert!(comb.combine(&DVector::zeros(3)).is_err());
    }

    proptest! {
        #[test]
        fn mean_is_linear_in_mask_and_gain(seed in any::<u64>(), c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
            let (s, sched) = small();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m1 = DVector::from_fn(4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let m2 = DVector::from_fn(4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let (a1, a2) = (Complex64::new(c1, 0.3), Complex64::new(-0.2, c2));
            let p = s.ue_position;
            let lhs = noiseless_mean(a1, &p, &(&m1 * Complex64::new(c1, 0.0) + &m2 * Complex64::new(c2, 0.0)), &s, &sched).unwrap();
            let rhs = noiseless_mean(a1, &p, &m1, &s, &sched).unwrap() * Complex64::new(c1, 0.0)
                + noiseless_mean(a1, &p, &m2, &s, &sched).unwrap() * Complex64::new(c2, 0.0);
            prop_assert!((lhs - rhs).norm() < 1e-12);
            let lhs = noiseless_mean(a1 + a2, &p, &m1, &s, &sched).unwrap();
            let rhs = noiseless_mean(a1, &p, &m1, &s, &sched).unwrap() + noiseless_mean(a2, &p, &m1, &s, &sched).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn seeds_reproduce_noise_and_rician_draws(seed in any::<u64>()) {
            let (s, sched) = small();
            let mask = FailureMask::ones(4);
            let one = Complex64::new(1.0, 0.0);
            let r1 = RicianChannelRealization::draw(one, one, 2.0, 4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let r2 = RicianChannelRealization::draw(one, one, 2.0, 4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&r1, &r2);
            let y1 = synthesize_rician(&s, &sched, &mask, &r1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let y2 = synthesize_rician(&s, &sched, &mask, &r2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(y1, y2);
        }
    }
}
