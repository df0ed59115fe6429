//! Censored quantile regression through the asymmetric Laplace likelihood
//! `f(z | x) = tau (1 - tau) exp(-rho_tau(z - max(x'theta, 0)))`.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{dot, Record};
use crate::model::{GradientModel, Model};
use crate::rng::RngStream;

/// Check function `rho_tau(u) = (|u| + (2 tau - 1) u) / 2`.
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    0.5 * (u.abs() + (2.0 * tau - 1.0) * u)
}

/// `log tau(1 - tau) - rho_tau(z - max(x'theta, 0))`.
#[inline]
pub fn cqr_logdensity(theta: &[f64], rec: &Record, tau: f64) -> f64 {
    let loc = dot(&rec.x, theta).max(0.0);
    (tau * (1.0 - tau)).ln() - check_loss(rec.z - loc, tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqrModel {
    tau: f64,
    dim: usize,
    log_norm: f64,
    truth: Option<Vec<f64>>,
}

impl CqrModel {
    pub fn new(tau: f64, dim: usize, truth: Option<Vec<f64>>) -> Self {
        assert!(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
        if let Some(t) = &truth {
            assert_eq!(t.len(), dim);
        }
        Self {
            tau,
            dim,
            log_norm: (tau * (1.0 - tau)).ln(),
            truth,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Model for CqrModel {
    type Obs = Record;

    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn log_density(&self, theta: &[f64], rec: &Record) -> f64 {
        let loc = dot(&rec.x, theta).max(0.0);
        self.log_norm - check_loss(rec.z - loc, self.tau)
    }

    fn true_param(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }
}

impl GradientModel for CqrModel {
    /// Subgradient; at `z = location` the check-function slope is `tau - 1/2`.
    fn grad_log_density(&self, theta: &[f64], rec: &Record, grad: &mut [f64]) {
        let xt = dot(&rec.x, theta);
        if xt <= 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return;
        }
        let u = rec.z - xt;
        let slope = if u > 0.0 {
            self.tau
        } else if u < 0.0 {
            self.tau - 1.0
        } else {
            self.tau - 0.5
        };
        for (g, &x) in grad.iter_mut().zip(&rec.x) {
            *g = slope * x;
        }
    }
}

/// Covariate law and truth of the censored regression simulator.
#[derive(Debug, Clone)]
pub struct CqrDesign {
    /// Conditional median parameter `(3, N(0, I))`.
    pub theta_median: Vec<f64>,
    /// `L^-T` for the Cholesky factor `L` of `Sigma_X^-1`, row-major.
    transform: Vec<f64>,
}

/// Noise standard deviation of the latent response.
pub const CQR_NOISE_SD: f64 = 2.0;

fn theta_star_from(median: &[f64], tau: f64) -> Vec<f64> {
    // latent noise is N(0, 4): only the intercept moves, by 2 Phi^-1(tau)
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(tau);
    let mut th = median.to_vec();
    th[0] += CQR_NOISE_SD * z;
    th
}

impl CqrDesign {
    /// Draws `theta = (3, N(0, I_{d-1}))` and `Sigma_X^-1 ~ Wishart(d - 1, I)`.
    pub fn new(dim: usize, rng: &mut RngStream) -> Self {
        assert!(dim >= 2, "censored regression needs an intercept and one covariate");
        let p = dim - 1;
        let mut theta = vec![3.0];
        theta.extend((0..p).map(|_| rng.normal()));

        // Wishart(p, I) with integer dof: sum of p outer products
        let mut w = DMatrix::<f64>::zeros(p, p);
        for _ in 0..p {
            let g = DVector::from_fn(p, |_, _| rng.normal());
            w += &g * g.transpose();
        }
        let l = w.cholesky().expect("Wishart draw is positive definite").l();
        // x = L^-T z has covariance (L L')^-1 = W^-1
        let a = l
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("triangular solve");
        Self {
            theta_median: theta,
            transform: (0..p * p).map(|k| a[(k / p, k % p)]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta_median.len()
    }

    /// Target parameter for quantile level `tau`.
    pub fn theta_star(&self, tau: f64) -> Vec<f64> {
        theta_star_from(&self.theta_median, tau)
    }

    /// Covariance of the non-constant covariates, row-major.
    pub fn sigma_x(&self) -> Vec<f64> {
        let p = self.dim() - 1;
        let a = &self.transform;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| a[i * p + k] * a[j * p + k]).sum();
            }
        }
        out
    }

    /// One record `(max(Z~, 0), X)`.
    pub fn sample(&self, rng: &mut RngStream) -> Record {
        let dim = self.dim();
        let p = dim - 1;
        let z: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        let mut x = Vec::with_capacity(dim);
        x.push(1.0);
        for i in 0..p {
            x.push((0..p).map(|j| self.transform[i * p + j] * z[j]).sum());
        }
        let latent = dot(&x, &self.theta_median) + CQR_NOISE_SD * rng.normal();
        Record { z: latent.max(0.0), x }
    }
}

/// Simulated censored regression data.
#[derive(Debug, Clone)]
pub struct CqrSimulation {
    pub data: Vec<Record>,
    /// Conditional median parameter `(3, N(0, I))`.
    pub theta_median: Vec<f64>,
    /// Covariance of the non-constant covariates, row-major.
    pub sigma_x: Vec<f64>,
}

impl CqrSimulation {
    /// Target parameter for quantile level `tau`.
    pub fn theta_star(&self, tau: f64) -> Vec<f64> {
        theta_star_from(&self.theta_median, tau)
    }

    pub fn censored_fraction(&self) -> f64 {
        self.data.iter().filter(|r| r.z == 0.0).count() as f64 / self.data.len() as f64
    }
}

/// `Z = max(Z~, 0)`, `Z~ | X ~ N(X'theta, 4)`, `X = (1, N(0, Sigma_X))` with
/// `Sigma_X^-1 ~ Wishart(d - 1, I)` and `theta = (3, N(0, I_{d-1}))`.
pub fn simulate_cqr(t_len: usize, dim: usize, rng: &mut RngStream) -> CqrSimulation {
    let design = CqrDesign::new(dim, rng);
    let data = (0..t_len).map(|_| design.sample(rng)).collect();
    CqrSimulation {
        data,
        sigma_x: design.sigma_x(),
        theta_median: design.theta_median,
    }
}
