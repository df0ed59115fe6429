//! Benchmark models, their simulators and priors.

mod bootstrap;
mod cqr;
mod dataset;
mod gaussian;
mod multimodal;
mod sagm;

pub use bootstrap::BootstrapStream;
pub use cqr::{check_loss, cqr_logdensity, simulate_cqr, CqrDesign, CqrModel, CqrSimulation, CQR_NOISE_SD};
pub use dataset::{read_dataset, write_dataset, DatasetError, Record};
pub use gaussian::{GaussianMeanModel, GaussianOracle};
pub use multimodal::{multimodal_mu, sample_multimodal, simulate_multimodal, MultimodalModel};
pub use sagm::{sagm_logdensity, sagm_truth, sample_sagm, simulate_sagm, SagmModel, SagmParams};

/// `log(sum exp(xs))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
