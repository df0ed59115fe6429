//! Proposal kernels.
//!
//! * G-PFSO: `theta = origin + h_{t-1} eps`, with `eps ~ N_d(0, Sigma)` between
//!   breakpoints and `eps ~ t_{d,nu}(0, Sigma)` right after one.
//! * G-PFSO mixtures: at breakpoints, `eps` comes from a Gaussian, a point mass
//!   at zero or a lighter-tailed Student-t with probability `w`.
//! * KS-PFSO: shrink towards the cloud mean, `N(s origin + (1 - s) mean, iota^2 V)`
//!   with `s = sqrt(1 - iota^2)`.
//! * Jitter: stay put with probability `1 - N^-1/2`, else add `N(0, I)`.

use nalgebra::DMatrix;

use crate::config::{GpfsoConfig, KernelStrategy, MixtureVariant};
use crate::error::{Error, Result};
use crate::particles::ParticleSystem;
use crate::rng::{ChiSquare, RngStream};
use crate::schedule::{LearningRate, Schedule};

/// Which family produced the particles of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Initial draw from the prior.
    Prior,
    Gaussian,
    /// Student-t (or mixture) move at a breakpoint.
    HeavyTailed,
    KernelSmoothing,
    Jitter,
}

/// Diagonal regularization added before factorizing the KS covariance.
pub const KS_JITTER: f64 = 1e-10;

/// Mean and Cholesky factor of the cloud, refreshed every step for KS-PFSO.
#[derive(Debug, Clone, PartialEq)]
pub struct KsState {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    /// Lower-triangular factor of `cov + 1e-10 I`, row-major.
    pub chol: Vec<f64>,
}

impl KsState {
    /// Weighted mean and covariance of the particle system.
    pub fn from_particles(ps: &ParticleSystem) -> Result<Self> {
        let (mean, cov) = ps.weighted_moments();
        Self::from_moments(mean, cov)
    }

    pub fn from_moments(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        assert_eq!(cov.len(), d * d);
        if cov.iter().any(|c| !c.is_finite()) {
            return Err(Error::CovarianceNotPsd);
        }
        let mut m = DMatrix::from_row_slice(d, d, &cov);
        for i in 0..d {
            m[(i, i)] += KS_JITTER;
        }
        let chol = m.cholesky().ok_or(Error::CovarianceNotPsd)?;
        let l = chol.l();
        let mut flat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
        }
        Ok(Self {
            mean,
            cov,
            chol: flat,
        })
    }
}

/// Immutable description of the proposal mechanism of a run.
#[derive(Debug, Clone)]
pub struct Kernel {
    strategy: KernelStrategy,
    dim: usize,
    nu: f64,
    /// Per-coordinate standard deviations, `sqrt(diag(Sigma))`.
    sigma_sd: Vec<f64>,
    chi: ChiSquare,
    chi_mix: Option<(f64, ChiSquare)>,
}

impl Kernel {
    pub fn new(cfg: &GpfsoConfig, dim: usize) -> Self {
        let sigma_sd = match &cfg.sigma_diag {
            Some(diag) => diag.iter().map(|v| v.sqrt()).collect(),
            None => vec![cfg.c_sigma.sqrt(); dim],
        };
        let chi_mix = match cfg.kernel {
            KernelStrategy::GpfsoMix {
                variant: MixtureVariant::Student(nu2),
                ..
            } => Some((nu2, ChiSquare::new(nu2))),
            _ => None,
        };
        Self {
            strategy: cfg.kernel,
            dim,
            nu: cfg.nu,
            sigma_sd,
            chi: ChiSquare::new(cfg.nu),
            chi_mix,
        }
    }

    pub fn strategy(&self) -> KernelStrategy {
        self.strategy
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The family used to produce `theta_t`.
    pub fn kind_at(&self, t: u64, schedule: &mut Schedule) -> KernelKind {
        match self.strategy {
            KernelStrategy::Gpfso | KernelStrategy::GpfsoMix { .. } => {
                if t >= 2 && schedule.is_breakpoint(t - 1) {
                    KernelKind::HeavyTailed
                } else {
                    KernelKind::Gaussian
                }
            }
            KernelStrategy::KsPfso { .. } => KernelKind::KernelSmoothing,
            KernelStrategy::Jitter { .. } => KernelKind::Jitter,
        }
    }

    /// Draws `theta_t` given `origin = theta-hat_{t-1}` for the G-PFSO family.
    ///
    /// Uses scale `h_{t-1}` and a heavy-tailed noise when `t - 1` is a breakpoint.
    pub fn propose(
        &self,
        origin: &[f64],
        t: u64,
        schedule: &mut Schedule,
        rate: LearningRate,
        rng: &mut RngStream,
    ) -> Vec<f64> {
        assert!(t >= 2, "the first particles come from the prior");
        let heavy = self.kind_at(t, schedule) == KernelKind::HeavyTailed;
        let mut out = vec![0.0; origin.len()];
        self.propose_gpfso_into(origin, &mut out, rate.at(t - 1), heavy, rng);
        out
    }

    /// In-place G-PFSO move with explicit scale `h`.
    pub fn propose_gpfso_into(
        &self,
        origin: &[f64],
        out: &mut [f64],
        h: f64,
        heavy: bool,
        rng: &mut RngStream,
    ) {
        debug_assert_eq!(origin.len(), out.len());
        if !heavy {
            self.gaussian_step(origin, out, h, rng);
            return;
        }
        student_step(origin, out, h, &self.sigma_sd, self.nu, &self.chi, rng);
        if let KernelStrategy::GpfsoMix { weight, variant } = self.strategy {
            // the selection uniform is drawn after the Student-t noise so that
            // weight 0 reproduces plain G-PFSO draw for draw
            if weight > 0.0 && rng.uniform() < weight {
                match variant {
                    MixtureVariant::Gauss => self.gaussian_step(origin, out, h, rng),
                    MixtureVariant::Dirac => out.copy_from_slice(origin),
                    MixtureVariant::Student(_) => {
                        let (nu2, chi2) = self.chi_mix.as_ref().expect("mixture sampler");
                        student_step(origin, out, h, &self.sigma_sd, *nu2, chi2, rng);
                    }
                }
            }
        }
    }

    #[inline]
    fn gaussian_step(&self, origin: &[f64], out: &mut [f64], h: f64, rng: &mut RngStream) {
        for ((o, &x), &sd) in out.iter_mut().zip(origin).zip(&self.sigma_sd) {
            *o = x + h * sd * rng.normal();
        }
    }
}

#[inline]
fn student_step(
    origin: &[f64],
    out: &mut [f64],
    h: f64,
    sigma_sd: &[f64],
    nu: f64,
    chi: &ChiSquare,
    rng: &mut RngStream,
) {
    for (o, &sd) in out.iter_mut().zip(sigma_sd) {
        *o = h * sd * rng.normal();
    }
    // t_nu = N(0, 1) * sqrt(nu / chi2_nu), one mixing variable for all coordinates
    let mix = (nu / chi.sample(rng)).sqrt();
    for (o, &x) in out.iter_mut().zip(origin) {
        *o = x + *o * mix;
    }
}

/// Kernel-smoothing shrinkage proposal.
pub fn propose_ks_into(
    origin: &[f64],
    out: &mut [f64],
    iota: f64,
    state: &KsState,
    rng: &mut RngStream,
    scratch: &mut [f64],
) {
    let d = origin.len();
    let s = (1.0 - iota * iota).sqrt();
    for z in scratch.iter_mut() {
        *z = rng.normal();
    }
    for i in 0..d {
        let row = &state.chol[i * d..i * d + i + 1];
        let noise: f64 = row.iter().zip(&scratch[..=i]).map(|(l, z)| l * z).sum();
        out[i] = s * origin[i] + (1.0 - s) * state.mean[i] + iota * noise;
    }
}

pub fn propose_ks(origin: &[f64], iota: f64, state: &KsState, rng: &mut RngStream) -> Vec<f64> {
    let mut out = vec![0.0; origin.len()];
    let mut scratch = vec![0.0; origin.len()];
    propose_ks_into(origin, &mut out, iota, state, rng, &mut scratch);
    out
}

/// Homogeneous jitter: moves with probability `N^-1/2`.
pub fn propose_jitter_into(
    origin: &[f64],
    out: &mut [f64],
    n_particles: usize,
    scale: f64,
    rng: &mut RngStream,
) -> bool {
    let p = (n_particles as f64).powf(-0.5);
    let moved = rng.uniform() < p;
    if moved {
        for (o, &x) in out.iter_mut().zip(origin) {
            *o = x + scale * rng.normal();
        }
    } else {
        out.copy_from_slice(origin);
    }
    moved
}

pub fn propose_jitter(origin: &[f64], n_particles: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut out = vec![0.0; origin.len()];
    propose_jitter_into(origin, &mut out, n_particles, 1.0, rng);
    out
}

/// Recomputes the KS-PFSO cloud summary.
pub fn refresh_ks_state(ps: &ParticleSystem) -> Result<KsState> {
    KsState::from_particles(ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleConfig;
    use approx::assert_relative_eq;

    fn gpfso_kernel(dim: usize, nu: f64, c_sigma: f64) -> Kernel {
        let cfg = GpfsoConfig {
            nu,
            c_sigma,
            ..GpfsoConfig::default()
        };
        Kernel::new(&cfg, dim)
    }

    #[test]
    fn zero_scale_keeps_origin() {
        let k = gpfso_kernel(3, 3.0, 2.0);
        let origin = [1.0, -2.0, 0.5];
        let mut out = [0.0; 3];
        let mut rng = RngStream::new(1);
        for heavy in [false, true] {
            k.propose_gpfso_into(&origin, &mut out, 0.0, heavy, &mut rng);
            assert_eq!(out, origin);
        }
    }

    #[test]
    fn gaussian_mode_variance() {
        // t = 5: t - 1 = 4 is not a breakpoint, h_4 = 0.5, variance h^2 c = 0.25
        let k = gpfso_kernel(1, 50.0, 1.0);
        let mut sched = Schedule::recursive(ScheduleConfig::default());
        assert_eq!(k.kind_at(5, &mut sched), KernelKind::Gaussian);
        let m = 100_000;
        let mut rng = RngStream::new(11);
        let draws: Vec<f64> = (0..m)
            .map(|_| k.propose(&[0.0], 5, &mut sched, LearningRate::Power(0.5), &mut rng)[0])
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / m as f64;
        // standard error of the second moment of N(0, s2): s2 sqrt(2/m)
        let se = 0.25 * (2.0 / m as f64).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "var = {var}");
    }

    #[test]
    fn breakpoint_switches_to_student() {
        let k = gpfso_kernel(1, 3.0, 1.0);
        let mut sched = Schedule::recursive(ScheduleConfig::default());
        assert_eq!(k.kind_at(6, &mut sched), KernelKind::HeavyTailed);
        assert_eq!(k.kind_at(7, &mut sched), KernelKind::Gaussian);
        assert_eq!(k.kind_at(8, &mut sched), KernelKind::HeavyTailed);
    }

    #[test]
    fn ks_fixed_point_and_shrinkage() {
        let state = KsState::from_moments(vec![0.0], vec![1.0]).unwrap();
        let iota = 0.68;
        let m = 200_000;
        let mut rng = RngStream::new(5);
        let draws: Vec<f64> = (0..m).map(|_| propose_ks(&[1.0], iota, &state, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
        let expected_mean = (1.0f64 - 0.4624).sqrt();
        assert_relative_eq!(expected_mean, 0.7332121111929344, epsilon = 1e-12);
        assert!((mean - expected_mean).abs() < 4.0 * (0.4624 / m as f64).sqrt());
        assert!((var - 0.4624).abs() < 4.0 * 0.4624 * (2.0 / m as f64).sqrt());

        // origin at the cloud mean: proposal mean is the cloud mean
        let state = KsState::from_moments(vec![2.5, -1.0], vec![1.0, 0.3, 0.3, 2.0]).unwrap();
        let mut out = [0.0; 2];
        let mut scratch = [0.0; 2];
        let mut acc = [0.0; 2];
        for _ in 0..m {
            propose_ks_into(&[2.5, -1.0], &mut out, 0.2, &state, &mut rng, &mut scratch);
            acc[0] += out[0];
            acc[1] += out[1];
        }
        assert!((acc[0] / m as f64 - 2.5).abs() < 4.0 * 0.2 * (1.0 / m as f64).sqrt());
        assert!((acc[1] / m as f64 + 1.0).abs() < 4.0 * 0.2 * (2.0 / m as f64).sqrt());
    }

    #[test]
    fn ks_small_iota_is_nearly_identity() {
        let state = KsState::from_moments(vec![0.0, 0.0], vec![4.0, 0.0, 0.0, 4.0]).unwrap();
        let mut rng = RngStream::new(2);
        let out = propose_ks(&[3.0, -3.0], 1e-6, &state, &mut rng);
        assert!((out[0] - 3.0).abs() < 1e-4 && (out[1] + 3.0).abs() < 1e-4);
    }

    #[test]
    fn ks_state_refresh() {
        let ps = ParticleSystem::new(2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let s = refresh_ks_state(&ps).unwrap();
        assert_eq!(s.mean, vec![1.0, 2.0]);
        assert!(s.cov.iter().all(|c| c.abs() < 1e-15));

        let ps = ParticleSystem::new(1, vec![0.0, 2.0]);
        let s = refresh_ks_state(&ps).unwrap();
        assert_relative_eq!(s.mean[0], 1.0);
        assert_relative_eq!(s.cov[0], 1.0);

        let ps =
            ParticleSystem::from_parts(1, vec![3.0, 9.0], vec![0.0, f64::NEG_INFINITY]).unwrap();
        let s = refresh_ks_state(&ps).unwrap();
        assert_eq!(s.mean, vec![3.0]);
        assert_eq!(s.cov, vec![0.0]);
    }

    #[test]
    fn ks_rejects_indefinite_covariance() {
        let err = KsState::from_moments(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::CovarianceNotPsd);
        let err = KsState::from_moments(vec![0.0], vec![f64::NAN]).unwrap_err();
        assert_eq!(err, Error::CovarianceNotPsd);
    }

    #[test]
    fn jitter_with_one_particle_always_moves() {
        let mut rng = RngStream::new(3);
        let mut out = [0.0];
        for _ in 0..1000 {
            assert!(propose_jitter_into(&[0.0], &mut out, 1, 1.0, &mut rng));
        }
    }

    #[test]
    fn mixture_with_zero_weight_matches_plain() {
        let plain = gpfso_kernel(4, 2.0, 3.0);
        let mix = Kernel::new(
            &GpfsoConfig {
                nu: 2.0,
                c_sigma: 3.0,
                kernel: KernelStrategy::GpfsoMix {
                    weight: 0.0,
                    variant: MixtureVariant::Student(1.0),
                },
                ..GpfsoConfig::default()
            },
            4,
        );
        let origin = [0.1, 0.2, 0.3, 0.4];
        let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
        for i in 0..1000 {
            let mut r1 = RngStream::new(i);
            let mut r2 = RngStream::new(i);
            plain.propose_gpfso_into(&origin, &mut a, 0.7, true, &mut r1);
            mix.propose_gpfso_into(&origin, &mut b, 0.7, true, &mut r2);
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
    }

    #[test]
    fn dirac_mixture_stays_with_probability_w() {
        let k = Kernel::new(
            &GpfsoConfig {
                kernel: KernelStrategy::GpfsoMix {
                    weight: 0.3,
                    variant: MixtureVariant::Dirac,
                },
                ..GpfsoConfig::default()
            },
            2,
        );
        let m = 100_000;
        let mut rng = RngStream::new(9);
        let mut out = [0.0; 2];
        let stays = (0..m)
            .filter(|_| {
                k.propose_gpfso_into(&[1.0, 1.0], &mut out, 1.0, true, &mut rng);
                out == [1.0, 1.0]
            })
            .count();
        let p = stays as f64 / m as f64;
        assert!((p - 0.3).abs() < 4.0 * (0.3f64 * 0.7 / m as f64).sqrt());
    }
}
