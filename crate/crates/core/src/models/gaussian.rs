use crate::model::Model;
use crate::schedule::LearningRate;

use super::LN_SQRT_2PI;

/// `Y ~ N(theta, 1)` with `theta` in `R`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianMeanModel {
    truth: Option<Vec<f64>>,
}

impl GaussianMeanModel {
    pub fn new(true_mean: Option<f64>) -> Self {
        Self {
            truth: true_mean.map(|m| vec![m]),
        }
    }
}

impl Model for GaussianMeanModel {
    type Obs = f64;

    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn log_density(&self, theta: &[f64], y: &f64) -> f64 {
        let r = y - theta[0];
        -LN_SQRT_2PI - 0.5 * r * r
    }

    fn true_param(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }
}

/// Exact tempered-posterior recursion for [`GaussianMeanModel`] with a
/// Gaussian prior and Gaussian kernels only:
///
/// `s2_t = g(s2_{t-1} + h_{t-1}^2)`, `m_t = m_{t-1} + s2_t (y_t - m_{t-1})`,
/// `g(x) = x / (1 + x)`, and `h_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOracle {
    pub t: u64,
    pub mean: f64,
    pub var: f64,
    /// Running average of `mean` over steps `1..=t`.
    pub bar: f64,
    pub rate: LearningRate,
}

impl GaussianOracle {
    pub fn new(prior_mean: f64, prior_var: f64, rate: LearningRate) -> Self {
        Self {
            t: 0,
            mean: prior_mean,
            var: prior_var,
            bar: 0.0,
            rate,
        }
    }

    pub fn step(&mut self, y: f64) {
        self.t += 1;
        let h = if self.t == 1 { 0.0 } else { self.rate.at(self.t - 1) };
        let x = self.var + h * h;
        self.var = x / (1.0 + x);
        self.mean += self.var * (y - self.mean);
        let c = (self.t - 1) as f64;
        self.bar = (c * self.bar + self.mean) / (c + 1.0);
    }
}
