//! Tunables of the optimizer.

use crate::error::{Error, Result};
use crate::schedule::{Breakpoints, LearningRate};

/// First mixture component used at breakpoints by [`KernelStrategy::GpfsoMix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixtureVariant {
    /// Gaussian with the breakpoint scale.
    Gauss,
    /// Point mass at the origin (no move).
    Dirac,
    /// Student-t with `nu' < nu` degrees of freedom.
    Student(f64),
}

/// How particles are moved between two observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelStrategy {
    /// Gaussian jitter, Student-t at breakpoints.
    Gpfso,
    /// Like `Gpfso`, but at breakpoints draws from `variant` with probability
    /// `weight` and from the Student-t otherwise.
    GpfsoMix {
        weight: f64,
        variant: MixtureVariant,
    },
    /// Kernel-smoothing shrinkage towards the cloud mean.
    KsPfso { iota: f64 },
    /// Time-homogeneous jitter: stay with probability `1 - N^-1/2`,
    /// otherwise add `N(0, scale^2 I)`.
    Jitter { scale: f64 },
}

/// Whether per-particle work may be spread over threads.
///
/// Results never depend on this setting. Without the `parallel` feature,
/// `Parallel` silently runs sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Full configuration of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct GpfsoConfig {
    pub n_particles: usize,
    /// Resample when `ESS <= c_ess * N`.
    pub c_ess: f64,
    /// Student-t degrees of freedom at breakpoints.
    pub nu: f64,
    pub learning_rate: LearningRate,
    /// Isotropic kernel covariance `c_sigma I_d`.
    pub c_sigma: f64,
    /// Optional diagonal covariance overriding `c_sigma`.
    pub sigma_diag: Option<Vec<f64>>,
    pub breakpoints: Breakpoints,
    pub kernel: KernelStrategy,
    /// Averaging restarts after this step; 0 disables the restart.
    pub burn_in: u64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for GpfsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 1000,
            c_ess: 0.7,
            nu: 50.0,
            learning_rate: LearningRate::Power(0.5),
            c_sigma: 1.0,
            sigma_diag: None,
            breakpoints: Breakpoints::default(),
            kernel: KernelStrategy::Gpfso,
            burn_in: 0,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl GpfsoConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_particles == 0 {
            return bad("n_particles must be positive".into());
        }
        if !(self.c_ess > 0.0 && self.c_ess <= 1.0) {
            return bad(format!("c_ess = {} not in (0, 1]", self.c_ess));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("nu = {} must be positive", self.nu));
        }
        if !(self.c_sigma > 0.0) || !self.c_sigma.is_finite() {
            return bad(format!("c_sigma = {} must be positive", self.c_sigma));
        }
        if let Some(diag) = &self.sigma_diag {
            if diag.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: diag.len(),
                });
            }
            if diag.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return bad("sigma_diag entries must be finite and >= 0".into());
            }
        }
        self.learning_rate.validate()?;
        if let Breakpoints::Recursive(s) = &self.breakpoints {
            s.validate(self.learning_rate.alpha())?;
        }
        match self.kernel {
            KernelStrategy::Gpfso => {}
            KernelStrategy::GpfsoMix { weight, variant } => {
                if !(0.0..1.0).contains(&weight) {
                    return bad(format!("mixture weight {weight} not in [0, 1)"));
                }
                if let MixtureVariant::Student(nu2) = variant {
                    if !(nu2 > 0.0 && nu2 < self.nu) {
                        return bad(format!("mixture nu' = {nu2} not in (0, nu)"));
                    }
                }
            }
            KernelStrategy::KsPfso { iota } => {
                if !(iota > 0.0 && iota < 1.0) {
                    return bad(format!("iota = {iota} not in (0, 1)"));
                }
            }
            KernelStrategy::Jitter { scale } => {
                if !(scale >= 0.0) || !scale.is_finite() {
                    return bad(format!("jitter scale {scale} must be >= 0"));
                }
            }
        }
        Ok(())
    }
}
