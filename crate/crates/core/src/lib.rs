//! Global stochastic optimization of expected log-likelihoods with a particle
//! filter.
//!
//! The optimizer tracks a tempered distribution over the parameter space. The
//! particles move with a Gaussian jitter whose scale `h_t = t^-alpha` shrinks
//! over time. At sparse breakpoint times the jitter turns into a heavy-tailed
//! Student-t so the cloud can still escape local modes. Particles are weighted
//! by the likelihood of each new observation and resampled when the effective
//! sample size drops. The weighted mean `theta_tilde` and its running average
//! `theta_bar` estimate the maximizer.
//!
//! ```
//! use gpfso::{models::GaussianMeanModel, run, GpfsoConfig, RecordStride, RngStream};
//!
//! let data: Vec<f64> = {
//!     let mut rng = RngStream::new(1);
//!     (0..500).map(|_| 2.0 + rng.normal()).collect()
//! };
//! let cfg = GpfsoConfig { n_particles: 200, seed: 3, ..GpfsoConfig::default() };
//! let model = GaussianMeanModel::new(Some(2.0));
//! let prior = |rng: &mut RngStream| vec![5.0 * rng.normal()];
//! let trace = run(&model, prior, &data, cfg, RecordStride::default()).unwrap();
//! assert!(trace.last().unwrap().err_bar_l2.unwrap() < 0.5);
//! ```

pub mod adagrad;
pub mod config;
pub mod error;
pub mod exec;
pub mod kernels;
pub mod model;
pub mod models;
pub mod optimizer;
pub mod particles;
pub mod resampling;
pub mod rng;
pub mod schedule;
pub mod trace;

pub use adagrad::{adagrad_run, AdagradState};
pub use config::{Execution, GpfsoConfig, KernelStrategy, MixtureVariant};
pub use error::{Error, Result};
pub use kernels::{Kernel, KernelKind, KsState};
pub use model::{FnModel, GradientModel, Model};
pub use optimizer::{run, Gpfso, StepReport};
pub use particles::{normalize_weights, ParticleSystem};
pub use resampling::{ess, maybe_resample, ResamplingScheme};
pub use rng::{Domain, RngStream};
pub use schedule::{learning_rate, Breakpoints, LearningRate, Schedule, ScheduleConfig};
pub use trace::{Norm, RecordStride, Trace, TraceRow};
