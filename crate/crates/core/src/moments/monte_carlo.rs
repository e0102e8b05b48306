use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use super::{CovBlock, MomentKind, DOMAIN_TOL};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Symmetric square root `S` with `S S = cov`, clipping tiny negative
/// eigenvalues.
pub(crate) fn symmetric_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.min();
    if min < -DOMAIN_TOL {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
        });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Monte Carlo estimate of a moment integral and its standard error.
pub fn mc_moment(
    kind: MomentKind,
    cov: &CovBlock,
    act: ActivationKind,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo moment needs at least 1000 samples, got {n_samples}"
        )));
    }
    if cov.dim() != kind.dim() {
        return Err(Error::DimensionMismatch {
            context: kind.name(),
            expected: kind.dim(),
            found: cov.dim(),
        });
    }
    let dim = cov.dim();
    let root = symmetric_sqrt(&cov.to_matrix())?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut z = [0.0f64; 4];
    let mut x = [0.0f64; 4];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        for zi in z.iter_mut().take(dim) {
            *zi = rng.sample(StandardNormal);
        }
        for a in 0..dim {
            x[a] = (0..dim).map(|b| root[(a, b)] * z[b]).sum();
        }
        let f = kind.integrand(act, &x[..dim]);
        sum += f;
        sum_sq += f * f;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
