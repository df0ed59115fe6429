//! Adagrad baseline: per-coordinate adaptive stochastic gradient ascent on
//! `log f_theta(y_t)`.

use crate::error::{Error, Result};
use crate::model::GradientModel;
use crate::trace::{Recorder, RecordStride, Trace, TraceRow};

/// Regularizer added to the squared-gradient accumulator.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub theta: Vec<f64>,
    /// Sum of squared gradients, per coordinate.
    pub accumulator: Vec<f64>,
    pub step_size: f64,
    pub epsilon: f64,
}

impl AdagradState {
    pub fn new(theta0: Vec<f64>, step_size: f64, epsilon: f64) -> Self {
        let d = theta0.len();
        Self {
            theta: theta0,
            accumulator: vec![0.0; d],
            step_size,
            epsilon,
        }
    }

    /// `G += g^2; theta += eta g / sqrt(G + eps)`.
    pub fn update(&mut self, grad: &[f64]) -> Result<()> {
        if let Some(coordinate) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { coordinate });
        }
        for ((x, acc), &g) in self.theta.iter_mut().zip(&mut self.accumulator).zip(grad) {
            *acc += g * g;
            *x += self.step_size * g / (*acc + self.epsilon).sqrt();
        }
        Ok(())
    }
}

/// Runs Adagrad over the stream. `theta_tilde` holds the iterate and
/// `theta_bar` its running average.
pub fn adagrad_run<M, I>(
    model: &M,
    theta0: Vec<f64>,
    stream: I,
    step_size: f64,
    epsilon: f64,
    stride: RecordStride,
) -> Result<Trace>
where
    M: GradientModel,
    I: IntoIterator,
    I::Item: std::borrow::Borrow<M::Obs>,
{
    use std::borrow::Borrow;
    let d = model.dim();
    if theta0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta0.len(),
        });
    }
    let mut state = AdagradState::new(theta0, step_size, epsilon);
    let mut bar = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut trace = Trace::new(d);
    let mut rec = Recorder::new(stride);
    let mut t = 0u64;
    for y in stream {
        t += 1;
        grad.iter_mut().for_each(|g| *g = 0.0);
        model.grad_log_density(&state.theta, y.borrow(), &mut grad);
        state.update(&grad).map_err(|e| e.at_step(t))?;
        let c = (t - 1) as f64;
        for (b, &x) in bar.iter_mut().zip(&state.theta) {
            *b = (c * *b + x) / (c + 1.0);
        }
        if rec.due(t) {
            trace.rows.push(TraceRow::new(t, state.theta.clone(), bar.clone(), 1.0, false, model.true_param()));
        }
    }
    if t == 0 {
        return Err(Error::EmptyStream);
    }
    if trace.last().map(|r| r.t) != Some(t) {
        trace.rows.push(TraceRow::new(t, state.theta.clone(), bar, 1.0, false, model.true_param()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    struct Quadratic;

    impl Model for Quadratic {
        type Obs = f64;
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, theta: &[f64], y: &f64) -> f64 {
            -0.5 * (theta[0] - y).powi(2)
        }
    }

    impl GradientModel for Quadratic {
        fn grad_log_density(&self, theta: &[f64], y: &f64, grad: &mut [f64]) {
            grad[0] = y - theta[0];
        }
    }

    struct Flat;

    impl Model for Flat {
        type Obs = ();
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&self, _: &[f64], _: &()) -> f64 {
            0.0
        }
    }

    impl GradientModel for Flat {
        fn grad_log_density(&self, _: &[f64], _: &(), grad: &mut [f64]) {
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    #[test]
    fn zero_gradient_keeps_start() {
        let tr = adagrad_run(&Flat, vec![1.5, -2.0], vec![(); 50], 0.1, DEFAULT_EPSILON, RecordStride::Every(1)).unwrap();
        assert!(tr.rows.iter().all(|r| r.theta_tilde == vec![1.5, -2.0]));
    }

    #[test]
    fn accumulator_is_sum_of_squares() {
        let mut s = AdagradState::new(vec![0.0, 0.0], 0.1, DEFAULT_EPSILON);
        s.update(&[1.0, -2.0]).unwrap();
        s.update(&[3.0, 0.5]).unwrap();
        assert_eq!(s.accumulator, vec![10.0, 4.25]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = AdagradState::new(vec![0.0, 0.0], 0.1, DEFAULT_EPSILON);
        assert_eq!(s.update(&[0.0, f64::NAN]), Err(Error::NonFiniteGradient { coordinate: 1 }));
    }

    #[test]
    fn quadratic_converges_monotonically() {
        let (eta, y, steps) = (0.5, 1.0, 2000);
        let tr = adagrad_run(&Quadratic, vec![0.0], vec![y; steps], eta, DEFAULT_EPSILON, RecordStride::Every(1)).unwrap();
        // scalar recursion, written out independently
        let (mut x, mut acc) = (0.0f64, 0.0f64);
        let mut prev = 0.0;
        for (k, row) in tr.rows.iter().enumerate() {
            let g = y - x;
            acc += g * g;
            x += eta * g / (acc + DEFAULT_EPSILON).sqrt();
            assert!((row.theta_tilde[0] - x).abs() < 1e-14, "step {k}");
            assert!(row.theta_tilde[0] >= prev && row.theta_tilde[0] <= y);
            prev = row.theta_tilde[0];
        }
        assert!((y - prev).abs() < 1e-3);
    }
}
