use gpfso::resampling::{expand_counts, multinomial_resample, ssp_resample, systematic_resample};
use gpfso::{maybe_resample, ParticleSystem, ResamplingScheme, RngStream};
use proptest::prelude::*;

fn random_weights(n: usize, rng: &mut RngStream) -> Vec<f64> {
    // exponential draws give a spread of sizes, some near-integral N W
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r / s).collect()
}

proptest! {
    #[test]
    fn ssp_counts_bracket_expectation(raw in prop::collection::vec(0.0f64..10.0, 1..80), seed: u64) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 0.0);
        let w: Vec<f64> = raw.iter().map(|r| r / s).collect();
        let n = w.len();
        let counts = ssp_resample(&w, &mut RngStream::new(seed));
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for (c, wi) in counts.iter().zip(&w) {
            let x = n as f64 * wi;
            prop_assert!((*c as f64 - x).abs() < 1.0 + 1e-9, "count {} vs {}", c, x);
        }
    }

    #[test]
    fn every_scheme_sums_to_n(raw in prop::collection::vec(0.0f64..1.0, 1..50), seed: u64) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 0.0);
        let w: Vec<f64> = raw.iter().map(|r| r / s).collect();
        for counts in [
            multinomial_resample(&w, &mut RngStream::new(seed)),
            systematic_resample(&w, &mut RngStream::new(seed)),
        ] {
            prop_assert_eq!(counts.iter().sum::<usize>(), w.len());
            for (c, wi) in counts.iter().zip(&w) {
                if *wi == 0.0 {
                    prop_assert_eq!(*c, 0);
                }
            }
        }
    }

    #[test]
    fn expansion_is_a_multiset(counts in prop::collection::vec(0usize..5, 1..30)) {
        let idx = expand_counts(&counts);
        prop_assert_eq!(idx.len(), counts.iter().sum::<usize>());
        for (n, c) in counts.iter().enumerate() {
            prop_assert_eq!(idx.iter().filter(|&&i| i == n).count(), *c);
        }
    }
}

#[test]
fn unbiased_counts() {
    let reps = 20_000;
    let mut wrng = RngStream::new(100);
    for n in [2usize, 7, 64] {
        for _ in 0..5 {
            let w = random_weights(n, &mut wrng);
            for scheme in [ResamplingScheme::Ssp, ResamplingScheme::Multinomial] {
                let mut rng = RngStream::new(n as u64 * 31 + 7);
                let mut sum = vec![0.0; n];
                for _ in 0..reps {
                    for (s, c) in sum.iter_mut().zip(scheme.counts(&w, &mut rng)) {
                        *s += c as f64;
                    }
                }
                for i in 0..n {
                    let x = n as f64 * w[i];
                    let mean = sum[i] / reps as f64;
                    // binomial variance bounds both schemes' count variance
                    let se = (n as f64 * w[i] * (1.0 - w[i]) / reps as f64).sqrt();
                    assert!((mean - x).abs() <= 4.0 * se + 1e-12, "{scheme:?} n={n} i={i}: {mean} vs {x}");
                }
            }
        }
    }
}

#[test]
fn resampled_mean_is_unbiased() {
    let n = 7;
    let mut rng = RngStream::new(4);
    let w = random_weights(n, &mut rng);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 2.0).collect();
    let target: f64 = w.iter().zip(&xs).map(|(a, b)| a * b).sum();
    let reps = 50_000;
    let mut acc = Vec::with_capacity(reps);
    for _ in 0..reps {
        let lw: Vec<f64> = w.iter().map(|v| v.ln()).collect();
        let mut ps = ParticleSystem::from_parts(1, xs.clone(), lw).unwrap();
        assert!(maybe_resample(&mut ps, 1.0, ResamplingScheme::Ssp, &mut rng).unwrap());
        acc.push(ps.particles().iter().sum::<f64>() / n as f64);
    }
    let mean = acc.iter().sum::<f64>() / reps as f64;
    let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / reps as f64;
    assert!((mean - target).abs() < 4.0 * (var / reps as f64).sqrt() + 1e-12);
}

#[test]
fn degenerate_weights_collapse_the_cloud() {
    let lw = vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut ps = ParticleSystem::from_parts(2, (0..8).map(f64::from).collect(), lw).unwrap();
    let mut rng = RngStream::new(0);
    assert!(maybe_resample(&mut ps, 0.7, ResamplingScheme::Ssp, &mut rng).unwrap());
    assert!(ps.iter().all(|p| p == [2.0, 3.0]));
    assert!(ps.weights().iter().all(|&w| w == 0.25));
}
