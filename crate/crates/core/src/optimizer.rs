//! The particle-filter optimization loop.
//!
//! Each step: check the ESS of the previous weights and resample if it fell
//! below `c_ess * N`; move every particle with the configured kernel; multiply
//! the weights by `f_theta(y_t)` (zero outside the parameter space);
//! normalize; record the weighted mean and update its running average.

use crate::config::{GpfsoConfig, KernelStrategy};
use crate::error::{Error, Result};
use crate::exec::{for_each_particle, map_indexed};
use crate::kernels::{propose_jitter_into, propose_ks_into, Kernel, KernelKind, KsState};
use crate::model::Model;
use crate::particles::ParticleSystem;
use crate::resampling::{maybe_resample, ResamplingScheme};
use crate::rng::{Domain, RngStream};
use crate::schedule::Schedule;
use crate::trace::{Recorder, RecordStride, Trace, TraceRow};

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub t: u64,
    /// ESS of the weights after the update.
    pub ess: f64,
    /// Whether the particles were resampled before moving.
    pub resampled: bool,
    pub kernel: KernelKind,
}

/// Running state of one optimizer run.
pub struct Gpfso<M: Model> {
    model: M,
    cfg: GpfsoConfig,
    resampling: ResamplingScheme,
    kernel: Kernel,
    schedule: Schedule,
    ps: ParticleSystem,
    next: Vec<f64>,
    t: u64,
    theta_tilde: Vec<f64>,
    bar: Vec<f64>,
    bar_count: u64,
    last: StepReport,
}

#[inline]
fn weight_increment<M: Model>(model: &M, theta: &[f64], obs: &M::Obs) -> f64 {
    if !model.in_support(theta) {
        return f64::NEG_INFINITY;
    }
    let lf = model.log_density(theta, obs);
    if lf.is_nan() {
        f64::NEG_INFINITY
    } else {
        lf
    }
}

impl<M: Model> Gpfso<M> {
    /// Draws `N` particles from the prior and weights them by `f_theta(y_1)`.
    pub fn init<P>(model: M, prior: P, cfg: GpfsoConfig, y1: &M::Obs) -> Result<Self>
    where
        P: Fn(&mut RngStream) -> Vec<f64> + Sync,
    {
        let d = model.dim();
        cfg.validate(d)?;
        let n = cfg.n_particles;
        let seed = cfg.seed;
        let draws: Vec<Vec<f64>> = map_indexed(cfg.execution, n, |i| {
            prior(&mut RngStream::substream(seed, Domain::Prior, 0, i as u64))
        });
        let mut flat = Vec::with_capacity(n * d);
        for p in &draws {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        let log_w = map_indexed(cfg.execution, n, |i| {
            weight_increment(&model, &flat[i * d..(i + 1) * d], y1)
        });
        let ps = ParticleSystem::from_parts(d, flat, log_w).map_err(|e| e.at_step(1))?;
        let theta_tilde = ps.weighted_mean();
        let last = StepReport {
            t: 1,
            ess: ps.ess(),
            resampled: false,
            kernel: KernelKind::Prior,
        };
        let kernel = Kernel::new(&cfg, d);
        let schedule = Schedule::new(cfg.breakpoints.clone());
        Ok(Self {
            model,
            kernel,
            schedule,
            next: vec![0.0; n * d],
            bar: theta_tilde.clone(),
            theta_tilde,
            bar_count: 1,
            t: 1,
            ps,
            resampling: ResamplingScheme::Ssp,
            cfg,
            last,
        })
    }

    /// Switches the resampling scheme (SSP by default).
    pub fn with_resampling(mut self, scheme: ResamplingScheme) -> Self {
        self.resampling = scheme;
        self
    }

    /// Processes observation `y_t` for `t = self.t() + 1`.
    pub fn step(&mut self, y: &M::Obs) -> Result<StepReport> {
        let t = self.t + 1;
        self.step_inner(t, y).map_err(|e| e.at_step(t))
    }

    fn step_inner(&mut self, t: u64, y: &M::Obs) -> Result<StepReport> {
        let seed = self.cfg.seed;
        let d = self.ps.dim();
        let n = self.ps.len();

        // kernel-smoothing moments come from the weighted cloud at t - 1
        let ks = match self.cfg.kernel {
            KernelStrategy::KsPfso { .. } => Some(KsState::from_particles(&self.ps)?),
            _ => None,
        };

        let mut rng = RngStream::substream(seed, Domain::Resample, t, 0);
        let resampled = maybe_resample(&mut self.ps, self.cfg.c_ess, self.resampling, &mut rng)?;

        let kind = self.kernel.kind_at(t, &mut self.schedule);
        let h = self.cfg.learning_rate.at(t - 1);
        let kernel = &self.kernel;
        let model = &self.model;
        let strategy = self.cfg.kernel;
        let exec = self.cfg.execution;
        let (particles, log_w) = self.ps.split_for_update();
        for_each_particle(
            exec,
            &mut self.next,
            d,
            log_w,
            || vec![0.0; d],
            |scratch, i, out, lw| {
                let origin = &particles[i * d..(i + 1) * d];
                let mut rng = RngStream::substream(seed, Domain::Propose, t, i as u64);
                match strategy {
                    KernelStrategy::Gpfso | KernelStrategy::GpfsoMix { .. } => kernel
                        .propose_gpfso_into(origin, out, h, kind == KernelKind::HeavyTailed, &mut rng),
                    KernelStrategy::KsPfso { iota } => {
                        let state = ks.as_ref().expect("ks state");
                        propose_ks_into(origin, out, iota, state, &mut rng, scratch)
                    }
                    KernelStrategy::Jitter { scale } => {
                        propose_jitter_into(origin, out, n, scale, &mut rng);
                    }
                }
                *lw += weight_increment(model, out, y);
            },
        );
        self.ps.swap_particles(&mut self.next);
        self.ps.normalize()?;

        self.t = t;
        self.theta_tilde = self.ps.weighted_mean();
        if self.cfg.burn_in > 0 && t == self.cfg.burn_in + 1 {
            self.bar_count = 0;
        }
        let c = self.bar_count as f64;
        for (b, &x) in self.bar.iter_mut().zip(&self.theta_tilde) {
            *b = (c * *b + x) / (c + 1.0);
        }
        self.bar_count += 1;
        self.last = StepReport {
            t,
            ess: self.ps.ess(),
            resampled,
            kernel: kind,
        };
        Ok(self.last)
    }

    /// Index of the last processed observation.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Weighted particle mean at the current step.
    pub fn theta_tilde(&self) -> &[f64] {
        &self.theta_tilde
    }

    /// Running average of `theta_tilde`.
    pub fn theta_bar(&self) -> &[f64] {
        &self.bar
    }

    /// Number of steps in the running average.
    pub fn bar_count(&self) -> u64 {
        self.bar_count
    }

    pub fn particles(&self) -> &ParticleSystem {
        &self.ps
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn config(&self) -> &GpfsoConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn last_report(&self) -> StepReport {
        self.last
    }

    /// The current state as a trace row.
    pub fn row(&self) -> TraceRow {
        TraceRow::new(
            self.t,
            self.theta_tilde.clone(),
            self.bar.clone(),
            self.last.ess,
            self.last.resampled,
            self.model.true_param(),
        )
    }
}

/// Runs the optimizer over a whole observation stream.
///
/// Rows are kept at the recording times of `stride`, plus the final step.
pub fn run<M, P, I>(model: M, prior: P, stream: I, cfg: GpfsoConfig, stride: RecordStride) -> Result<Trace>
where
    M: Model,
    P: Fn(&mut RngStream) -> Vec<f64> + Sync,
    I: IntoIterator,
    I::Item: std::borrow::Borrow<M::Obs>,
{
    use std::borrow::Borrow;
    let mut it = stream.into_iter();
    let y1 = it.next().ok_or(Error::EmptyStream)?;
    let mut opt = Gpfso::init(model, prior, cfg, y1.borrow())?;
    let mut trace = Trace::new(opt.model.dim());
    let mut rec = Recorder::new(stride);
    if rec.due(1) {
        trace.rows.push(opt.row());
    }
    for y in it {
        opt.step(y.borrow())?;
        if rec.due(opt.t) {
            trace.rows.push(opt.row());
        }
    }
    if trace.last().map(|r| r.t) != Some(opt.t) {
        trace.rows.push(opt.row());
    }
    Ok(trace)
}
