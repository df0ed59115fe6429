//! Softmax-gated Gaussian mixture regression.
//!
//! Layout of `theta` for `k` components and covariate dimension `dx`:
//! `(beta_w[0..k-1], beta_mu[0..k], beta_sigma[0..k])`, each block of length
//! `dx`, so `dim = dx (3k - 1)`.

use super::{dot, log_sum_exp, Record, LN_SQRT_2PI};
use crate::model::Model;
use crate::rng::RngStream;

/// Block view over a flat SAGM parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct SagmParams<'a> {
    theta: &'a [f64],
    k: usize,
    dx: usize,
}

impl<'a> SagmParams<'a> {
    pub fn new(theta: &'a [f64], k: usize, dx: usize) -> Self {
        assert!(k >= 1 && dx >= 1);
        assert_eq!(theta.len(), dx * (3 * k - 1), "SAGM parameter length");
        Self { theta, k, dx }
    }

    pub fn dim(k: usize, dx: usize) -> usize {
        dx * (3 * k - 1)
    }

    /// Gate coefficients, `j < k - 1`.
    pub fn beta_w(&self, j: usize) -> &'a [f64] {
        assert!(j + 1 < self.k);
        &self.theta[j * self.dx..(j + 1) * self.dx]
    }

    pub fn beta_mu(&self, j: usize) -> &'a [f64] {
        let off = (self.k - 1 + j) * self.dx;
        &self.theta[off..off + self.dx]
    }

    pub fn beta_sigma(&self, j: usize) -> &'a [f64] {
        let off = (2 * self.k - 1 + j) * self.dx;
        &self.theta[off..off + self.dx]
    }

    /// Mixture weights at covariate `x`.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        let logs = self.log_weights(x);
        logs.iter().map(|l| l.exp()).collect()
    }

    fn log_weights(&self, x: &[f64]) -> Vec<f64> {
        let mut a: Vec<f64> = (0..self.k - 1).map(|j| -dot(x, self.beta_w(j))).collect();
        a.push(0.0);
        let norm = log_sum_exp(&a);
        a.iter_mut().for_each(|v| *v -= norm);
        a
    }
}

/// `log sum_k w_k(x) N(z; x'beta_mu_k, exp(-x'beta_sigma_k)^2)`.
pub fn sagm_logdensity(theta: &[f64], rec: &Record, k: usize) -> f64 {
    let dx = rec.x.len();
    let p = SagmParams::new(theta, k, dx);
    let x = &rec.x;
    let lw = p.log_weights(x);
    let terms: Vec<f64> = (0..k)
        .map(|j| {
            let s = dot(x, p.beta_sigma(j));
            // log sd = -s, so (z - mu) / sd = (z - mu) e^s
            let r = (rec.z - dot(x, p.beta_mu(j))) * s.exp();
            lw[j] - LN_SQRT_2PI + s - 0.5 * r * r
        })
        .collect();
    log_sum_exp(&terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SagmModel {
    k: usize,
    dx: usize,
    truth: Option<Vec<f64>>,
}

impl SagmModel {
    pub fn new(k: usize, dx: usize, truth: Option<Vec<f64>>) -> Self {
        if let Some(t) = &truth {
            assert_eq!(t.len(), SagmParams::dim(k, dx));
        }
        Self { k, dx, truth }
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn covariate_dim(&self) -> usize {
        self.dx
    }

    /// `Exp(1)` on the first coordinate, standard normal elsewhere.
    pub fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        let d = SagmParams::dim(self.k, self.dx);
        let mut th = Vec::with_capacity(d);
        th.push(-(1.0 - rng.uniform()).ln());
        th.extend((1..d).map(|_| rng.normal()));
        th
    }
}

impl Model for SagmModel {
    type Obs = Record;

    fn dim(&self) -> usize {
        SagmParams::dim(self.k, self.dx)
    }

    fn log_density(&self, theta: &[f64], rec: &Record) -> f64 {
        sagm_logdensity(theta, rec, self.k)
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        theta[0] >= 0.0
    }

    fn true_param(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }
}

/// The two-component truth with `dx = 4`.
pub fn sagm_truth() -> Vec<f64> {
    let mut th = vec![1.0, 0.1, 0.1, -0.1];
    th.extend([1.0, 1.0, 1.0, -1.0]);
    th.extend([-1.0, 1.0, 1.0, 1.0]);
    th.extend([0.0, 1.0, 1.0, 1.0]);
    th.extend([0.5, -1.0, -1.0, 1.0]);
    th
}

/// Draws `X = (1, N(0, I_3))` and `Z | X` from the mixture at [`sagm_truth`].
pub fn simulate_sagm(t_len: usize, rng: &mut RngStream) -> (Vec<Record>, Vec<f64>) {
    let truth = sagm_truth();
    let data = (0..t_len).map(|_| sample_sagm(&truth, rng)).collect();
    (data, truth)
}

/// One record from the two-component, `dx = 4` mixture at `theta`.
pub fn sample_sagm(theta: &[f64], rng: &mut RngStream) -> Record {
    let p = SagmParams::new(theta, 2, 4);
    let x = vec![1.0, rng.normal(), rng.normal(), rng.normal()];
    let w = p.weights(&x);
    let j = if rng.uniform() < w[0] { 0 } else { 1 };
    let mu = dot(&x, p.beta_mu(j));
    let sd = (-dot(&x, p.beta_sigma(j))).exp();
    Record { z: mu + sd * rng.normal(), x }
}
