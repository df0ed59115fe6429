//! Log-log rate fits: `log(err_t) = beta1 - beta2 log(t) + eps`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub beta1: f64,
    /// Decay rate; positive when the error shrinks.
    pub beta2: f64,
    /// Residual standard error of the log-log regression.
    pub rse: f64,
    pub points: usize,
    /// Rows in the window dropped for a nonpositive or non-finite error.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlopeError {
    #[error("need at least {MIN_POINTS} usable points in the window, found {found}")]
    InsufficientPoints { found: usize },
    #[error("empty window [{lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
}

pub const MIN_POINTS: usize = 10;

/// OLS fit over rows with `lo <= t <= hi`.
pub fn fit_slope<I>(rows: I, lo: f64, hi: f64) -> Result<SlopeFit, SlopeError>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    if !(lo < hi) {
        return Err(SlopeError::InvalidWindow { lo, hi });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut skipped = 0;
    for (t, err) in rows {
        if t < lo || t > hi {
            continue;
        }
        if err > 0.0 && err.is_finite() {
            xs.push(-t.ln());
            ys.push(err.ln());
        } else {
            skipped += 1;
        }
    }
    let n = xs.len();
    if n < MIN_POINTS {
        return Err(SlopeError::InsufficientPoints { found: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(SlopeError::InsufficientPoints { found: 1 });
    }
    let beta2 = sxy / sxx;
    let beta1 = my - beta2 * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - beta1 - beta2 * x).powi(2))
        .sum();
    Ok(SlopeFit {
        beta1,
        beta2,
        rse: (sse / (nf - 2.0)).sqrt(),
        points: n,
        skipped,
    })
}

/// Fraction of `errors` strictly below `threshold`.
pub fn success_rate(errors: &[f64], threshold: f64) -> f64 {
    assert!(!errors.is_empty(), "no replications to score");
    errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (1..=1000).map(|k| (k as f64 * 10.0, f(k as f64 * 10.0))).collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_slope(series(|t| 3.0 * t.powf(-0.5)), 10.0, 1e4).unwrap();
        assert_relative_eq!(fit.beta2, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.beta1, 3f64.ln(), epsilon = 1e-10);
        assert!(fit.rse < 1e-10);
        assert_eq!(fit.points, 1000);
    }

    #[test]
    fn constant_error() {
        let fit = fit_slope(series(|_| 0.7), 10.0, 1e4).unwrap();
        assert!(fit.beta2.abs() < 1e-12);
    }

    #[test]
    fn wobbly_power_law() {
        let fit = fit_slope(series(|t| 2.0 * t.powf(-0.3) * (1.0 + 0.01 * t.ln().sin())), 10.0, 1e4).unwrap();
        assert!((fit.beta2 - 0.3).abs() < 0.01);
    }

    #[test]
    fn window_and_skips() {
        let mut rows = series(|t| t.powf(-1.0));
        rows[500].1 = 0.0;
        rows[501].1 = f64::NAN;
        let fit = fit_slope(rows.clone(), 1000.0, 9000.0).unwrap();
        assert_eq!(fit.skipped, 2);
        assert_eq!(fit.points, 801 - 2);
        assert_eq!(
            fit_slope(rows.clone(), 10.0, 50.0).unwrap_err(),
            SlopeError::InsufficientPoints { found: 5 }
        );
        assert!(matches!(fit_slope(rows, 5.0, 5.0), Err(SlopeError::InvalidWindow { .. })));
    }

    #[test]
    fn success_rate_examples() {
        assert_eq!(success_rate(&[0.0, 0.0], 0.2), 1.0);
        assert_eq!(success_rate(&[1.0, 2.0], 0.2), 0.0);
        assert_eq!(success_rate(&[0.1, 0.3], 0.2), 0.5);
    }
}
