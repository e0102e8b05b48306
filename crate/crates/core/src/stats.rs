//! Log-log fits and seed bootstrap for scaling laws.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares through `(x, y)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "fit abscissae and ordinates",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a line fit needs at least two points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "line fit input",
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "a line fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Exponent of `y ~ x^slope` from a fit of `ln y` against `ln x`.
///
/// Fails unless every value is strictly positive.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "a power-law fit needs strictly positive data".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Power-law exponent with a seed-bootstrap spread.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    /// Exponent fitted to the seed means.
    pub slope: f64,
    /// Standard deviation of the exponent over bootstrap resamples; zero with one seed.
    pub slope_std: f64,
    pub resamples: usize,
}

/// Fits `mean_s y[i][s] ~ x[i]^slope` and bootstraps the exponent by
/// resampling the seeds of each point with replacement.
pub fn bootstrap_power_law(
    x: &[f64],
    per_seed: &[Vec<f64>],
    resamples: usize,
    seed: u64,
) -> Result<ScalingFit> {
    if x.len() != per_seed.len() {
        return Err(Error::DimensionMismatch {
            context: "scaling points and seed samples",
            expected: x.len(),
            found: per_seed.len(),
        });
    }
    if per_seed.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument(
            "every scaling point needs at least one seed".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let means: Vec<f64> = per_seed.iter().map(|v| mean(v)).collect();
    let slope = fit_power_law(x, &means)?.slope;

    let mut rng = rng_from(seed, stream::SHUFFLE);
    let mut slopes = Vec::with_capacity(resamples);
    let mut resampled = vec![0.0; x.len()];
    for _ in 0..resamples {
        for (out, samples) in resampled.iter_mut().zip(per_seed) {
            let n = samples.len();
            *out = (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64;
        }
        slopes.push(fit_power_law(x, &resampled)?.slope);
    }
    let slope_std = if slopes.len() < 2 {
        0.0
    } else {
        let m = mean(&slopes);
        (slopes.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt()
    };
    Ok(ScalingFit {
        slope,
        slope_std,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_is_recovered() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        let fit = fit_power_law(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept.exp(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn non_positive_data_is_rejected() {
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(fit_line(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn bootstrap_of_identical_seeds_has_no_spread() {
        let x = [1.0, 4.0, 16.0];
        let per_seed = vec![vec![1.0; 5], vec![0.5; 5], vec![0.25; 5]];
        let fit = bootstrap_power_law(&x, &per_seed, 200, 1).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert!(fit.slope_std < 1e-12);
    }

    #[test]
    fn bootstrap_spread_is_positive_for_noisy_seeds() {
        let x = [1.0, 4.0, 16.0];
        let per_seed = vec![
            vec![0.8, 1.2, 1.0],
            vec![0.4, 0.6, 0.5],
            vec![0.2, 0.3, 0.25],
        ];
        let fit = bootstrap_power_law(&x, &per_seed, 500, 7).unwrap();
        assert!(fit.slope_std > 0.0 && fit.slope_std < 0.5);
        let again = bootstrap_power_law(&x, &per_seed, 500, 7).unwrap();
        assert_eq!(fit, again);
    }
}
