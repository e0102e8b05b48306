//! First-order noise correction to a noiseless fixed point.
//!
//! Writing the reduced state as `X = X0 + sigma^2 X1`, the stationarity
//! condition `F(X, sigma^2) = 0` at first order gives `J X1 = -b` with `J` the
//! Jacobian of `F` at `(X0, 0)` and `b = dF/d(sigma^2)`. Since the rates are
//! affine in `sigma^2`, `b = F(X0, 1) - F(X0, 0)` exactly. `J` is built by
//! central finite differences and solved with an SVD pseudo-inverse so that
//! conserved directions (as in the linear SCM) are tolerated as long as `b`
//! has no component outside the range of `J` and the error does not depend on
//! them.

use nalgebra::{DMatrix, DVector};

use super::denoising::{DenoisingLayout, DenoisingState};
use super::reduced::{ReducedScmState, ScmLayout};
use super::{rates_from_gram, OdeConfig};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::gen_error::gen_error_from_gram;

/// Relative finite-difference step for the Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Singular values below this fraction of the largest span the null space.
pub const NULL_THRESHOLD: f64 = 1e-7;
/// Largest tolerated `|J X1 + b| / |b|`.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Largest tolerated component of the error gradient along null directions,
/// relative to its norm.
const NULL_GRADIENT_TOL: f64 = 1e-5;

/// Reduced system around whose noiseless fixed point the expansion is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbativeSystem {
    /// SCM with `M` teacher and `M + L` student units, `T = I`, unit second layers.
    ReducedScm {
        teacher_units: usize,
        extra_units: usize,
        activation: ActivationKind,
    },
    /// Erf network with `Z` students per teacher unit, both layers trained at
    /// the same rate.
    Denoising {
        teacher_units: usize,
        groups: usize,
        v_star: f64,
    },
    /// Single Erf student learning a single teacher unit of squared norm `T`.
    Perceptron { teacher_norm: f64 },
}

impl PerturbativeSystem {
    fn validate(&self) -> Result<()> {
        match *self {
            PerturbativeSystem::ReducedScm { teacher_units, .. } => {
                ScmLayout::new(teacher_units, 0).map(|_| ())
            }
            PerturbativeSystem::Denoising {
                teacher_units,
                groups,
                v_star,
            } => DenoisingLayout::new(teacher_units, groups, v_star).map(|_| ()),
            PerturbativeSystem::Perceptron { teacher_norm } => {
                if teacher_norm.is_finite() && teacher_norm > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "teacher norm must be positive, got {teacher_norm}"
                    )))
                }
            }
        }
    }

    /// Full parameter vector at the noiseless fixed point and the mask of free parameters.
    fn fixed_point(&self, eta: f64) -> (Vec<f64>, Vec<bool>) {
        match *self {
            PerturbativeSystem::ReducedScm {
                teacher_units,
                extra_units,
                ..
            } => (
                ReducedScmState::fixed_point().to_array().to_vec(),
                ScmLayout {
                    m: teacher_units,
                    l: extra_units,
                }
                .active()
                .to_vec(),
            ),
            PerturbativeSystem::Denoising {
                teacher_units,
                groups,
                v_star,
            } => (
                DenoisingState::fixed_point(groups, v_star)
                    .to_array()
                    .to_vec(),
                DenoisingLayout {
                    m: teacher_units,
                    z: groups,
                    v_star,
                }
                .active(eta)
                .to_vec(),
            ),
            PerturbativeSystem::Perceptron { teacher_norm } => {
                (vec![teacher_norm, teacher_norm], vec![true, true])
            }
        }
    }

    fn config(&self, eta: f64, sigma_sq: f64) -> OdeConfig {
        let sigma = sigma_sq.sqrt();
        match *self {
            PerturbativeSystem::ReducedScm { activation, .. } => {
                OdeConfig::scm(activation, eta, sigma)
            }
            PerturbativeSystem::Denoising { .. } => {
                OdeConfig::both_layers(ActivationKind::Erf, eta, sigma)
            }
            PerturbativeSystem::Perceptron { .. } => {
                OdeConfig::scm(ActivationKind::Erf, eta, sigma)
            }
        }
    }

    /// Rate of the full parameter vector.
    fn rate(&self, x: &[f64], eta: f64, sigma_sq: f64) -> Result<Vec<f64>> {
        let cfg = self.config(eta, sigma_sq);
        match *self {
            PerturbativeSystem::ReducedScm {
                teacher_units,
                extra_units,
                ..
            } => ScmLayout {
                m: teacher_units,
                l: extra_units,
            }
            .rhs(&ReducedScmState::from_array(x), &cfg)
            .map(|d| d.to_array().to_vec()),
            PerturbativeSystem::Denoising {
                teacher_units,
                groups,
                v_star,
            } => DenoisingLayout {
                m: teacher_units,
                z: groups,
                v_star,
            }
            .rhs(&DenoisingState::from_array(x), &cfg)
            .map(|d| d.to_array().to_vec()),
            PerturbativeSystem::Perceptron { teacher_norm } => {
                let gram = perceptron_gram(x, teacher_norm);
                let rate = rates_from_gram(&gram, &[1.0], &[1.0], &cfg)?;
                Ok(vec![rate.q[(0, 0)], rate.r[(0, 0)]])
            }
        }
    }

    fn gen_error(&self, x: &[f64]) -> Result<f64> {
        match *self {
            PerturbativeSystem::ReducedScm {
                teacher_units,
                extra_units,
                activation,
            } => ScmLayout {
                m: teacher_units,
                l: extra_units,
            }
            .gen_error(&ReducedScmState::from_array(x), activation),
            PerturbativeSystem::Denoising {
                teacher_units,
                groups,
                v_star,
            } => DenoisingLayout {
                m: teacher_units,
                z: groups,
                v_star,
            }
            .gen_error(&DenoisingState::from_array(x), ActivationKind::Erf),
            PerturbativeSystem::Perceptron { teacher_norm } => gen_error_from_gram(
                &perceptron_gram(x, teacher_norm),
                &[1.0],
                &[1.0],
                ActivationKind::Erf,
            ),
        }
    }
}

/// Perceptron state is `(Q, R)`.
fn perceptron_gram(x: &[f64], teacher_norm: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[x[0], x[1], x[1], teacher_norm])
}

/// Result of the linearised fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeSolution {
    pub system: PerturbativeSystem,
    pub eta: f64,
    /// Noiseless fixed point, full parameter vector.
    pub fixed_point: Vec<f64>,
    /// First-order shift per unit `sigma^2`, full parameter vector.
    pub shift: Vec<f64>,
    /// `d eps_g / d(sigma^2)` at `sigma = 0`.
    pub eg_slope: f64,
    /// Ratio of largest to smallest retained singular value of the Jacobian.
    pub condition: f64,
    /// Number of discarded (conserved) directions.
    pub null_dim: usize,
    /// Largest real part among the eigenvalues of retained directions.
    pub leading_eigenvalue: f64,
}

impl PerturbativeSolution {
    /// `eps_g` to first order in `sigma^2`.
    pub fn eg(&self, sigma: f64) -> f64 {
        self.eg_slope * sigma * sigma
    }

    /// `X0 + sigma^2 X1`.
    pub fn state(&self, sigma: f64) -> Vec<f64> {
        let s2 = sigma * sigma;
        self.fixed_point
            .iter()
            .zip(&self.shift)
            .map(|(a, b)| a + s2 * b)
            .collect()
    }

    /// Norm of the rate at the corrected state with noise `sigma`; `O(sigma^4)`.
    pub fn residual(&self, sigma: f64) -> Result<f64> {
        let rate = self
            .system
            .rate(&self.state(sigma), self.eta, sigma * sigma)?;
        Ok(rate.iter().map(|r| r * r).sum::<f64>().sqrt())
    }
}

/// Linearises `system` at its noiseless fixed point and solves for the
/// first-order noise correction.
pub fn perturbative_solve(system: &PerturbativeSystem, eta: f64) -> Result<PerturbativeSolution> {
    system.validate()?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    let (x0, active) = system.fixed_point(eta);
    let free: Vec<usize> = (0..x0.len()).filter(|&i| active[i]).collect();
    let dim = free.len();

    let restrict = |full: &[f64]| DVector::from_iterator(dim, free.iter().map(|&i| full[i]));
    let expand = |y: &[f64]| {
        let mut full = x0.clone();
        for (slot, &i) in free.iter().enumerate() {
            full[i] = y[slot];
        }
        full
    };
    let rate = |y: &[f64], s2: f64| -> Result<DVector<f64>> {
        Ok(restrict(&system.rate(&expand(y), eta, s2)?))
    };

    let y0 = restrict(&x0);
    let b = rate(y0.as_slice(), 1.0)? - rate(y0.as_slice(), 0.0)?;
    let mut jac = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let h = JACOBIAN_STEP * y0[col].abs().max(1.0);
        let mut plus = y0.clone();
        let mut minus = y0.clone();
        plus[col] += h;
        minus[col] -= h;
        let diff = (rate(plus.as_slice(), 0.0)? - rate(minus.as_slice(), 0.0)?) / (2.0 * h);
        jac.set_column(col, &diff);
    }

    let svd = jac.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    if s_max == 0.0 || !s_max.is_finite() {
        return Err(Error::SingularJacobian {
            residual: b.norm(),
            condition: f64::INFINITY,
        });
    }
    let cutoff = NULL_THRESHOLD * s_max;
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut x1 = DVector::zeros(dim);
    let mut s_min = f64::INFINITY;
    let mut null_dirs = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let right = v_t.row(k).transpose();
        if s > cutoff {
            s_min = s_min.min(s);
            let coeff = u.column(k).dot(&b) / s;
            x1 -= right * coeff;
        } else {
            null_dirs.push(right);
        }
    }
    let condition = s_max / s_min;
    let residual = (&jac * &x1 + &b).norm();
    if residual > RESIDUAL_TOL * b.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::SingularJacobian {
            residual,
            condition,
        });
    }

    // stability of the retained directions
    let eigen = jac.complex_eigenvalues();
    let leading = eigen
        .iter()
        .filter(|z| z.norm() > cutoff)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if leading > 0.0 {
        return Err(Error::UnstableFixedPoint { leading });
    }

    let eg = |y: &DVector<f64>| system.gen_error(&expand(y.as_slice()));
    if !null_dirs.is_empty() {
        let mut grad = DVector::zeros(dim);
        for col in 0..dim {
            let h = JACOBIAN_STEP * y0[col].abs().max(1.0);
            let mut plus = y0.clone();
            let mut minus = y0.clone();
            plus[col] += h;
            minus[col] -= h;
            grad[col] = (eg(&plus)? - eg(&minus)?) / (2.0 * h);
        }
        let scale = grad.norm().max(f64::MIN_POSITIVE);
        for dir in &null_dirs {
            if grad.dot(dir).abs() > NULL_GRADIENT_TOL * scale {
                return Err(Error::SingularJacobian {
                    residual,
                    condition,
                });
            }
        }
    }

    let x1_norm = x1.norm();
    let eg_slope = if x1_norm == 0.0 {
        0.0
    } else {
        let h = 1e-4 / x1_norm;
        (eg(&(&y0 + &x1 * h))? - eg(&(&y0 - &x1 * h))?) / (2.0 * h)
    };

    let mut shift = vec![0.0; x0.len()];
    for (slot, &i) in free.iter().enumerate() {
        shift[i] = x1[slot];
    }
    Ok(PerturbativeSolution {
        system: *system,
        eta,
        fixed_point: x0.clone(),
        shift,
        eg_slope,
        condition,
        null_dim: null_dirs.len(),
        leading_eigenvalue: leading,
    })
}

/// Asymptotic generalisation error to first order in `sigma^2`.
pub fn perturbative_eg(system: &PerturbativeSystem, eta: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    Ok(perturbative_solve(system, eta)?.eg(sigma))
}
