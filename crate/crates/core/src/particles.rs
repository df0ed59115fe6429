//! Weighted particle clouds over the parameter space.

use crate::error::{Error, Result};

/// Normalizes log-weights in a numerically stable way.
///
/// Returns the normalized weights and `log sum exp(log_weights)`. Entries equal
/// to `-inf` map to weight exactly zero.
pub fn normalize_weights(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut weights = vec![0.0; log_weights.len()];
    let log_norm = normalize_into(log_weights, &mut weights)?;
    Ok((weights, log_norm))
}

pub(crate) fn normalize_into(log_weights: &[f64], weights: &mut [f64]) -> Result<f64> {
    debug_assert_eq!(log_weights.len(), weights.len());
    let max = log_weights
        .iter()
        .copied()
        .filter(|w| !w.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllWeightsZero);
    }
    let mut sum = 0.0;
    for (w, &lw) in weights.iter_mut().zip(log_weights) {
        // NaN log-densities are treated as zero density
        *w = if lw.is_nan() { 0.0 } else { (lw - max).exp() };
        sum += *w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    Ok(max + sum.ln())
}

/// `N` weighted points in `R^d`, stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    dim: usize,
    particles: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl ParticleSystem {
    /// Builds an equally weighted system from row-major particle storage.
    pub fn new(dim: usize, particles: Vec<f64>) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert!(
            !particles.is_empty() && particles.len().is_multiple_of(dim),
            "particle buffer length must be a positive multiple of dim"
        );
        let n = particles.len() / dim;
        Self {
            dim,
            particles,
            weights: vec![1.0 / n as f64; n],
            log_weights: vec![0.0; n],
        }
    }

    /// Builds a system from explicit points and log-weights, normalizing them.
    pub fn from_parts(dim: usize, particles: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        let mut ps = Self::new(dim, particles);
        if log_weights.len() != ps.len() {
            return Err(Error::DimensionMismatch {
                expected: ps.len(),
                got: log_weights.len(),
            });
        }
        ps.log_weights = log_weights;
        ps.normalize()?;
        Ok(ps)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn particle(&self, n: usize) -> &[f64] {
        &self.particles[n * self.dim..(n + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.particles.chunks_exact(self.dim)
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Current particles (read) and running log-weights (write).
    pub(crate) fn split_for_update(&mut self) -> (&[f64], &mut [f64]) {
        (&self.particles, &mut self.log_weights)
    }

    pub(crate) fn swap_particles(&mut self, buf: &mut Vec<f64>) {
        debug_assert_eq!(buf.len(), self.particles.len());
        std::mem::swap(&mut self.particles, buf);
    }

    pub(crate) fn replace_particles(&mut self, particles: Vec<f64>) {
        debug_assert_eq!(particles.len(), self.particles.len());
        self.particles = particles;
    }

    /// Recomputes normalized weights from the running log-weights, then
    /// re-centres the log-weights so their maximum is zero.
    pub fn normalize(&mut self) -> Result<f64> {
        let log_norm = normalize_into(&self.log_weights, &mut self.weights)?;
        let max = self
            .log_weights
            .iter()
            .copied()
            .filter(|w| !w.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        for lw in &mut self.log_weights {
            *lw -= max;
        }
        Ok(log_norm)
    }

    /// Sets every running log-weight to zero (equal weights).
    pub fn reset_weights(&mut self) {
        let n = self.len() as f64;
        self.log_weights.iter_mut().for_each(|w| *w = 0.0);
        self.weights.iter_mut().for_each(|w| *w = 1.0 / n);
    }

    /// Weighted mean `sum_n W^n theta^n`.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (p, &w) in self.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += w * x;
            }
        }
        mean
    }

    /// Weighted mean and weighted covariance (row-major `d x d`).
    pub fn weighted_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let mean = self.weighted_mean();
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        let mut centred = vec![0.0; d];
        for (p, &w) in self.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for ((c, &x), &m) in centred.iter_mut().zip(p).zip(&mean) {
                *c = x - m;
            }
            for i in 0..d {
                let wi = w * centred[i];
                for j in i..d {
                    cov[i * d + j] += wi * centred[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[i * d + j] = cov[j * d + i];
            }
        }
        (mean, cov)
    }

    /// Effective sample size of the normalized weights.
    pub fn ess(&self) -> f64 {
        crate::resampling::ess(&self.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_log_weights() {
        let (w, ln) = normalize_weights(&[0.0, 0.0, 0.0]).unwrap();
        for x in &w {
            assert_relative_eq!(*x, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_relative_eq!(ln, 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn negative_infinity_is_zero_weight() {
        let (w, _) = normalize_weights(&[0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn direct_normalization() {
        let (w, _) = normalize_weights(&[2f64.ln(), 0.0, 0.0]).unwrap();
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(w[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(w[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn all_zero_is_an_error() {
        let err = normalize_weights(&[f64::NEG_INFINITY; 4]).unwrap_err();
        assert_eq!(err, Error::AllWeightsZero);
    }

    #[test]
    fn survives_huge_negative_log_weights() {
        let (w, _) = normalize_weights(&[-1e6, -1e6 - 2f64.ln()]).unwrap();
        assert_relative_eq!(w[0], 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn weighted_mean_examples() {
        let ps = ParticleSystem::new(2, vec![0.0, 0.0, 2.0, 2.0]);
        assert_eq!(ps.weighted_mean(), vec![1.0, 1.0]);

        let ps = ParticleSystem::new(3, vec![1.5, -2.0, 7.0]);
        assert_eq!(ps.weighted_mean(), vec![1.5, -2.0, 7.0]);

        let ps = ParticleSystem::from_parts(1, vec![0.0, 4.0], vec![3f64.ln(), 0.0]).unwrap();
        assert_relative_eq!(ps.weighted_mean()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_weight_iff_neg_infinite_log_weight() {
        let ps = ParticleSystem::from_parts(
            1,
            vec![0.0, 1.0, 2.0],
            vec![-3.0, f64::NEG_INFINITY, -700.0],
        )
        .unwrap();
        assert_eq!(ps.weights()[1], 0.0);
        assert!(ps.weights()[2] > 0.0);
    }

    #[test]
    fn moments_of_two_points() {
        let ps = ParticleSystem::new(1, vec![0.0, 2.0]);
        let (m, v) = ps.weighted_moments();
        assert_relative_eq!(m[0], 1.0);
        assert_relative_eq!(v[0], 1.0);
    }

    proptest! {
        #[test]
        fn shift_invariance(lw in prop::collection::vec(-50.0f64..50.0, 1..40), c in -1e3f64..1e3) {
            let (a, _) = normalize_weights(&lw).unwrap();
            let shifted: Vec<f64> = lw.iter().map(|x| x + c).collect();
            let (b, _) = normalize_weights(&shifted).unwrap();
            let sum: f64 = a.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn mean_is_affine_equivariant(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
            lw_seed in prop::collection::vec(-5.0f64..5.0, 20),
            a in prop::array::uniform4(-3.0f64..3.0),
            b in prop::array::uniform2(-5.0f64..5.0),
        ) {
            let n = pts.len();
            let flat: Vec<f64> = pts.iter().flat_map(|&(x, y)| [x, y]).collect();
            let lw = lw_seed[..n].to_vec();
            let ps = ParticleSystem::from_parts(2, flat, lw.clone()).unwrap();
            let mapped: Vec<f64> = pts
                .iter()
                .flat_map(|&(x, y)| [a[0] * x + a[1] * y + b[0], a[2] * x + a[3] * y + b[1]])
                .collect();
            let qs = ParticleSystem::from_parts(2, mapped, lw).unwrap();
            let m = ps.weighted_mean();
            let expected = [a[0] * m[0] + a[1] * m[1] + b[0], a[2] * m[0] + a[3] * m[1] + b[1]];
            let got = qs.weighted_mean();
            prop_assert!((got[0] - expected[0]).abs() < 1e-9);
            prop_assert!((got[1] - expected[1]).abs() < 1e-9);
        }
    }
}
