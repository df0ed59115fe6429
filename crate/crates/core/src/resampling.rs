//! Effective sample size and resampling.
//!
//! Schemes return offspring counts; [`expand_counts`] turns them into an
//! ancestor index list. SSP (Srinivasan sampling process) is the default: it is
//! unbiased and every count is either `floor(N W^n)` or `ceil(N W^n)`.

use crate::error::{Error, Result};
use crate::particles::ParticleSystem;
use crate::rng::RngStream;

/// `1 / sum W^2`.
pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    1.0 / s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResamplingScheme {
    #[default]
    Ssp,
    Multinomial,
    Systematic,
}

impl ResamplingScheme {
    pub fn counts(self, weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
        match self {
            ResamplingScheme::Ssp => ssp_resample(weights, rng),
            ResamplingScheme::Multinomial => multinomial_resample(weights, rng),
            ResamplingScheme::Systematic => systematic_resample(weights, rng),
        }
    }
}

// fractional parts below this are treated as already integral
const FRAC_EPS: f64 = 1e-12;

/// SSP resampling of `N = weights.len()` offspring.
pub fn ssp_resample(weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    let nf = n as f64;
    let mut counts = Vec::with_capacity(n);
    let mut frac = Vec::with_capacity(n);
    for &w in weights {
        let x = nf * w;
        let fl = x.floor();
        counts.push(fl as usize);
        let r = x - fl;
        frac.push(if (FRAC_EPS..=1.0 - FRAC_EPS).contains(&r) { r } else { r.round() });
    }
    // whole-unit remainders from rounding tiny fractions
    for (c, f) in counts.iter_mut().zip(frac.iter_mut()) {
        if *f == 1.0 {
            *c += 1;
            *f = 0.0;
        }
    }
    let target = n - counts.iter().sum::<usize>().min(n);

    // Pairwise merging: the pending index i keeps a fractional part in (0, 1);
    // each merge with the next fractional j makes at least one of them integral
    // while preserving both expectations.
    let mut pending: Option<usize> = None;
    let mut assigned = 0usize;
    for j in 0..n {
        if frac[j] == 0.0 {
            continue;
        }
        let Some(i) = pending else {
            pending = Some(j);
            continue;
        };
        let (a, b) = (frac[i], frac[j]);
        let up = (1.0 - a).min(b); // mass moved from j to i
        let down = a.min(1.0 - b); // mass moved from i to j
        if rng.uniform() * (up + down) < down {
            frac[i] = a + up;
            frac[j] = b - up;
        } else {
            frac[i] = a - down;
            frac[j] = b + down;
        }
        for k in [i, j] {
            if frac[k] < FRAC_EPS {
                frac[k] = 0.0;
            } else if frac[k] > 1.0 - FRAC_EPS {
                frac[k] = 0.0;
                counts[k] += 1;
                assigned += 1;
            }
        }
        pending = if frac[i] != 0.0 {
            Some(i)
        } else if frac[j] != 0.0 {
            Some(j)
        } else {
            None
        };
    }
    // floating-point leftovers: the last fractional index absorbs the remaining unit
    if assigned < target {
        let k = pending.unwrap_or_else(|| {
            (0..n)
                .max_by(|&x, &y| (nf * weights[x] - counts[x] as f64).total_cmp(&(nf * weights[y] - counts[y] as f64)))
                .expect("non-empty")
        });
        counts[k] += target - assigned;
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), n);
    counts
}

/// Counts of `N` i.i.d. categorical draws.
pub fn multinomial_resample(weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    let cdf = cumulative(weights);
    let mut counts = vec![0usize; n];
    for _ in 0..n {
        let u = rng.uniform() * cdf[n - 1];
        counts[cdf.partition_point(|&c| c <= u).min(n - 1)] += 1;
    }
    counts
}

/// Systematic resampling: one uniform, `N` evenly spaced points.
pub fn systematic_resample(weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    let cdf = cumulative(weights);
    let total = cdf[n - 1];
    let u0 = rng.uniform();
    let mut counts = vec![0usize; n];
    let mut k = 0;
    for i in 0..n {
        let u = (u0 + i as f64) / n as f64 * total;
        while k < n - 1 && cdf[k] <= u {
            k += 1;
        }
        counts[k] += 1;
    }
    counts
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Ancestor indices: particle `n` appears exactly `counts[n]` times, in order.
pub fn expand_counts(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(n, &c)| std::iter::repeat_n(n, c))
        .collect()
}

/// Resamples when `ESS <= c_ess * N`, resetting the weights to equal.
///
/// Returns whether resampling happened.
pub fn maybe_resample(
    ps: &mut ParticleSystem,
    c_ess: f64,
    scheme: ResamplingScheme,
    rng: &mut RngStream,
) -> Result<bool> {
    let n = ps.len();
    if ps.weights().iter().all(|&w| w == 0.0) {
        return Err(Error::AllWeightsZero);
    }
    if ps.ess() > c_ess * n as f64 {
        return Ok(false);
    }
    let counts = scheme.counts(ps.weights(), rng);
    let ancestors = expand_counts(&counts);
    let d = ps.dim();
    let mut next = Vec::with_capacity(n * d);
    for &a in &ancestors {
        next.extend_from_slice(ps.particle(a));
    }
    ps.replace_particles(next);
    ps.reset_weights();
    Ok(true)
}
