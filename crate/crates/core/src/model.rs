//! The contract between the optimizer and a statistical model.

/// A parametric family `{f_theta}` evaluated through its log-density.
///
/// Observations are opaque to the engine. `log_density` may return `-inf`
/// (zero density) but never `+inf`; it need not integrate to one, so any
/// loss `-phi(theta, y)` can be plugged in.
pub trait Model: Sync {
    type Obs: Sync;

    fn dim(&self) -> usize;

    fn log_density(&self, theta: &[f64], obs: &Self::Obs) -> f64;

    /// Membership in the parameter space. Particles outside get weight zero.
    fn in_support(&self, _theta: &[f64]) -> bool {
        true
    }

    /// The target parameter, when known. Only used for error reporting.
    fn true_param(&self) -> Option<&[f64]> {
        None
    }
}

/// Models that can also supply the gradient of `log f_theta(y)` in `theta`.
pub trait GradientModel: Model {
    fn grad_log_density(&self, theta: &[f64], obs: &Self::Obs, grad: &mut [f64]);
}

impl<M: Model + ?Sized> Model for &M {
    type Obs = M::Obs;

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, theta: &[f64], obs: &Self::Obs) -> f64 {
        (**self).log_density(theta, obs)
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        (**self).in_support(theta)
    }

    fn true_param(&self) -> Option<&[f64]> {
        (**self).true_param()
    }
}

/// A model assembled from closures; handy for toy objectives.
pub struct FnModel<O, F, S = fn(&[f64]) -> bool> {
    dim: usize,
    log_density: F,
    support: Option<S>,
    true_param: Option<Vec<f64>>,
    _obs: std::marker::PhantomData<fn(&O)>,
}

impl<O, F> FnModel<O, F>
where
    F: Fn(&[f64], &O) -> f64 + Sync,
{
    pub fn new(dim: usize, log_density: F) -> Self {
        Self {
            dim,
            log_density,
            support: None,
            true_param: None,
            _obs: std::marker::PhantomData,
        }
    }
}

impl<O, F, S> FnModel<O, F, S>
where
    F: Fn(&[f64], &O) -> f64 + Sync,
    S: Fn(&[f64]) -> bool + Sync,
{
    pub fn with_support<S2>(self, support: S2) -> FnModel<O, F, S2>
    where
        S2: Fn(&[f64]) -> bool + Sync,
    {
        FnModel {
            dim: self.dim,
            log_density: self.log_density,
            support: Some(support),
            true_param: self.true_param,
            _obs: std::marker::PhantomData,
        }
    }

    pub fn with_true_param(mut self, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), self.dim);
        self.true_param = Some(theta);
        self
    }
}

impl<O: Sync, F, S> Model for FnModel<O, F, S>
where
    F: Fn(&[f64], &O) -> f64 + Sync,
    S: Fn(&[f64]) -> bool + Sync,
{
    type Obs = O;

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &[f64], obs: &O) -> f64 {
        (self.log_density)(theta, obs)
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        self.support.as_ref().is_none_or(|s| s(theta))
    }

    fn true_param(&self) -> Option<&[f64]> {
        self.true_param.as_deref()
    }
}
