use gpfso::models::{
    cqr_logdensity, read_dataset, sagm_logdensity, sagm_truth, simulate_cqr, simulate_multimodal,
    simulate_sagm, write_dataset, BootstrapStream, CqrModel, MultimodalModel, Record, SagmModel,
    SagmParams,
};
use gpfso::{GradientModel, Model, RngStream};

fn integrate_pieces<F: Fn(f64) -> f64>(f: F, mut cuts: Vec<f64>) -> f64 {
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| quadrature::integrate(&f, w[0], w[1], 1e-12).integral)
        .sum()
}

#[test]
fn cqr_density_integrates_to_one() {
    let mut rng = RngStream::new(1);
    for _ in 0..5 {
        let tau = 0.05 + 0.9 * rng.uniform();
        let theta: Vec<f64> = (0..3).map(|_| 2.0 * rng.normal()).collect();
        let x = vec![1.0, rng.normal(), rng.normal()];
        let loc = x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        let reach = 60.0 / tau.min(1.0 - tau);
        let total = integrate_pieces(
            |z| cqr_logdensity(&theta, &Record { z, x: x.clone() }, tau).exp(),
            vec![loc - reach, loc, loc + reach],
        );
        assert!((total - 1.0).abs() < 1e-6, "tau {tau}: {total}");
    }
}

#[test]
fn multimodal_density_integrates_to_one() {
    let m = MultimodalModel::new(20);
    let mut rng = RngStream::new(2);
    for _ in 0..5 {
        let theta: Vec<f64> = m.center().iter().map(|c| c + rng.normal()).collect();
        let x: Vec<f64> = (0..20).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let mu = gpfso::models::multimodal_mu(&theta, &x);
        let total = integrate_pieces(
            |z| m.log_density(&theta, &Record { z, x: x.clone() }).exp(),
            vec![mu - 40.0, mu, mu + 40.0],
        );
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }
}

#[test]
fn sagm_density_integrates_to_one() {
    let mut rng = RngStream::new(3);
    for _ in 0..5 {
        let theta: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let x = vec![1.0, rng.normal(), rng.normal(), rng.normal()];
        let p = SagmParams::new(&theta, 2, 4);
        let mut cuts = Vec::new();
        let mut wide: f64 = 0.0;
        for k in 0..2 {
            let mu: f64 = x.iter().zip(p.beta_mu(k)).map(|(a, b)| a * b).sum();
            let sd = (-x.iter().zip(p.beta_sigma(k)).map(|(a, b)| a * b).sum::<f64>()).exp();
            cuts.extend([mu - 10.0 * sd, mu, mu + 10.0 * sd]);
            wide = wide.max(mu.abs() + 40.0 * sd);
        }
        cuts.extend([-wide, wide]);
        let total = integrate_pieces(
            |z| sagm_logdensity(&theta, &Record { z, x: x.clone() }, 2).exp(),
            cuts,
        );
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }
}

#[test]
fn sagm_hand_examples() {
    // K = 2, dx = 1: (beta_w, beta_mu_1, beta_mu_2, beta_sigma_1, beta_sigma_2)
    let rec = Record { z: 0.0, x: vec![1.0] };
    let lf = sagm_logdensity(&[0.0, 1.0, -1.0, 0.0, 0.0], &rec, 2);
    let log_phi1 = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5;
    assert!((lf - log_phi1).abs() < 1e-12);
    assert!((lf + 1.41894).abs() < 1e-5);

    // identical components collapse to a single Gaussian whatever the gate
    let rec = Record { z: 0.3, x: vec![1.0] };
    let a = sagm_logdensity(&[5.0, 0.2, 0.2, 0.4, 0.4], &rec, 2);
    let b = sagm_logdensity(&[-3.0, 0.2, 0.2, 0.4, 0.4], &rec, 2);
    assert!((a - b).abs() < 1e-12);

    // zero gate coefficients give equal weights
    let th = vec![0.0; SagmParams::dim(3, 2)];
    let w = SagmParams::new(&th, 3, 2).weights(&[1.0, -0.4]);
    assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn sagm_finite_for_large_scale_arguments() {
    let model = SagmModel::new(2, 4, None);
    let mut th = sagm_truth();
    for s in [-50.0, -20.0, 20.0, 50.0] {
        // x = (1, 0, 0, 0) so x' beta_sigma equals the intercept
        th[12] = s;
        th[16] = s;
        for z in [-100.0, 0.0, 1.0, 100.0] {
            let lf = model.log_density(&th, &Record { z, x: vec![1.0, 0.0, 0.0, 0.0] });
            assert!(!lf.is_nan() && lf < f64::INFINITY, "s {s}, z {z}: {lf}");
        }
    }
    assert!(!model.in_support(&{
        let mut t = th.clone();
        t[0] = -0.1;
        t
    }));
}

#[test]
fn cqr_gradient_matches_finite_differences() {
    let m = CqrModel::new(0.8, 5, None);
    let mut rng = RngStream::new(4);
    let sim = simulate_cqr(500, 5, &mut rng);
    let mut checked = 0;
    for rec in &sim.data {
        let theta: Vec<f64> = sim.theta_median.iter().map(|v| v + rng.normal()).collect();
        let xt: f64 = rec.x.iter().zip(&theta).map(|(a, b)| a * b).sum();
        if xt.abs() < 1e-3 || (rec.z - xt.max(0.0)).abs() < 1e-3 {
            continue;
        }
        let mut g = vec![0.0; 5];
        m.grad_log_density(&theta, rec, &mut g);
        for i in 0..5 {
            let eps = 1e-6 / (1.0 + rec.x[i].abs());
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += eps;
            tm[i] -= eps;
            let fd = (m.log_density(&tp, rec) - m.log_density(&tm, rec)) / (2.0 * eps);
            let err = (fd - g[i]).abs();
            assert!(err < 1e-5 * g[i].abs().max(1.0), "coord {i}: {fd} vs {}", g[i]);
        }
        checked += 1;
    }
    assert!(checked > 400);
}

#[test]
fn cqr_censored_fraction() {
    // covariate scale and truth are redrawn per seed, so check the median draw
    let mut fracs: Vec<f64> = (0..21)
        .map(|seed| simulate_cqr(20_000, 5, &mut RngStream::new(seed)).censored_fraction())
        .collect();
    fracs.sort_by(f64::total_cmp);
    assert!((0.05..=0.25).contains(&fracs[10]), "{fracs:?}");
}

#[test]
fn cqr_quantile_target() {
    for seed in 0..5 {
        let mut rng = RngStream::new(seed);
        let sim = simulate_cqr(100_000, 5, &mut rng);

        // Z <= x' theta_tau has conditional probability tau wherever x' theta_tau > 0
        for tau in [0.5, 0.99] {
            let th = sim.theta_star(tau);
            let (mut below, mut total) = (0usize, 0usize);
            for r in &sim.data {
                let q: f64 = r.x.iter().zip(&th).map(|(a, b)| a * b).sum();
                if q > 0.0 {
                    total += 1;
                    below += (r.z <= q) as usize;
                }
            }
            let p = below as f64 / total as f64;
            let se = (tau * (1.0 - tau) / total as f64).sqrt();
            assert!((p - tau).abs() < 4.0 * se, "seed {seed}, tau {tau}: {p}");
        }
    }
}

#[test]
fn simulator_truths() {
    let mut rng = RngStream::new(6);
    let (_, star) = simulate_multimodal(5, 20, &mut rng);
    assert_eq!(star, vec![-1.0; 20]);
    let (data, truth) = simulate_sagm(20_000, &mut rng);
    assert_eq!(&truth[..4], &[1.0, 0.1, 0.1, -0.1]);
    assert!(data.iter().all(|r| r.x[0] == 1.0 && r.z.is_finite()));
    // average gate weight of the first component
    let p = SagmParams::new(&truth, 2, 4);
    let w1 = data.iter().map(|r| p.weights(&r.x)[0]).sum::<f64>() / data.len() as f64;
    assert!((w1 - 0.27).abs() < 0.01, "{w1}");
}

#[test]
fn dataset_file_round_trip() {
    let mut rng = RngStream::new(7);
    let sim = simulate_cqr(200, 4, &mut rng);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write_dataset(&sim.data, &mut file).unwrap();
    let back = read_dataset(std::fs::File::open(file.path()).unwrap()).unwrap();
    assert_eq!(back, sim.data);
    let text = std::fs::read_to_string(file.path()).unwrap();
    assert!(text.starts_with("z,x1,x2,x3,x4\n"));
}

#[test]
fn bootstrap_frequencies() {
    let data: Vec<usize> = (0..10).collect();
    let draws = 100_000;
    let mut counts = [0usize; 10];
    for &v in BootstrapStream::new(&data, RngStream::new(8)).take(draws) {
        counts[v] += 1;
    }
    let sd = (draws as f64 * 0.1 * 0.9).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 * 0.1).abs() < 4.0 * sd);
    }

    let one = [Record { z: 1.0, x: vec![] }];
    assert!(BootstrapStream::new(&one, RngStream::new(1)).take(50).all(|r| r.z == 1.0));

    let a: Vec<usize> = BootstrapStream::new(&data, RngStream::new(3)).take(100).copied().collect();
    let b: Vec<usize> = BootstrapStream::new(&data, RngStream::new(3)).take(100).copied().collect();
    assert_eq!(a, b);
}
