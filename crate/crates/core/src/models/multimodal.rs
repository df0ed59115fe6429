//! Laplace regression with the multimodal mean
//! `mu(theta, x) = sum_i exp(-x_i theta_i^2) + x_i theta_{d-i+1}`.

use super::Record;
use crate::model::Model;
use crate::rng::RngStream;

pub fn multimodal_mu(theta: &[f64], x: &[f64]) -> f64 {
    let d = theta.len();
    (0..d)
        .map(|i| (-x[i] * theta[i] * theta[i]).exp() + x[i] * theta[d - 1 - i])
        .sum()
}

/// Laplace likelihood with scale `b` on the open max-norm ball of radius
/// `radius` around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalModel {
    b: f64,
    center: Vec<f64>,
    radius: f64,
    truth: Option<Vec<f64>>,
}

impl MultimodalModel {
    pub fn new(dim: usize) -> Self {
        let star = vec![-1.0; dim];
        Self {
            b: 0.5,
            center: star.clone(),
            radius: 20.0,
            truth: Some(star),
        }
    }

    pub fn with_scale(mut self, b: f64) -> Self {
        assert!(b > 0.0);
        self.b = b;
        self
    }

    /// Replaces the parameter used for error tracking.
    pub fn with_truth(mut self, truth: Option<Vec<f64>>) -> Self {
        if let Some(t) = &truth {
            assert_eq!(t.len(), self.center.len());
        }
        self.truth = truth;
        self
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Uniform draw on the parameter space.
    pub fn sample_uniform(&self, rng: &mut RngStream) -> Vec<f64> {
        self.center
            .iter()
            .map(|c| c + self.radius * (2.0 * rng.uniform() - 1.0))
            .collect()
    }
}

impl Model for MultimodalModel {
    type Obs = Record;

    fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    fn log_density(&self, theta: &[f64], rec: &Record) -> f64 {
        let mu = multimodal_mu(theta, &rec.x);
        -(2.0 * self.b).ln() - (rec.z - mu).abs() / self.b
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(&self.center)
            .all(|(t, c)| (t - c).abs() < self.radius)
    }

    fn true_param(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }
}

/// `X ~ Unif[-1, 1]^d`, `Z | X ~ N(mu(theta*, X), 4)`, `theta* = (-1, ..., -1)`.
pub fn simulate_multimodal(t_len: usize, dim: usize, rng: &mut RngStream) -> (Vec<Record>, Vec<f64>) {
    let data = (0..t_len).map(|_| sample_multimodal(dim, rng)).collect();
    (data, vec![-1.0; dim])
}

/// One record of [`simulate_multimodal`].
pub fn sample_multimodal(dim: usize, rng: &mut RngStream) -> Record {
    let x: Vec<f64> = (0..dim).map(|_| 2.0 * rng.uniform() - 1.0).collect();
    let mu: f64 = x.iter().map(|xi| (-xi).exp() - xi).sum();
    Record { z: mu + 2.0 * rng.normal(), x }
}
