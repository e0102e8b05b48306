//! Closed-form asymptotic generalisation errors and stability thresholds.
//!
//! The general Erf SCM asymptote has no closed form here; use
//! [`crate::ode::perturbative_eg`] for it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn check_rates(eta: f64, sigma: f64) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eta must be finite and non-negative, got {eta}"
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    Ok(())
}

fn check_units(teacher_units: usize) -> Result<()> {
    if teacher_units == 0 {
        return Err(Error::InvalidArgument(
            "the teacher needs at least one hidden unit".into(),
        ));
    }
    Ok(())
}

/// Small-`eta` Erf SCM asymptote `sigma^2 eta (L + M / sqrt 3) / (2 pi)`.
pub fn eg_scm_erf_small_eta(
    teacher_units: usize,
    extra_units: usize,
    eta: f64,
    sigma: f64,
) -> Result<f64> {
    check_units(teacher_units)?;
    check_rates(eta, sigma)?;
    let units = extra_units as f64 + teacher_units as f64 / 3f64.sqrt();
    Ok(sigma * sigma * eta * units / (2.0 * PI))
}

/// Linear SCM asymptote `eta sigma^2 K / (4 - 2 eta K)` with `K = M + L`.
///
/// Fails with [`Error::Divergence`] when `eta K >= 2`.
pub fn eg_scm_linear(
    teacher_units: usize,
    extra_units: usize,
    eta: f64,
    sigma: f64,
) -> Result<f64> {
    check_units(teacher_units)?;
    check_rates(eta, sigma)?;
    let k = (teacher_units + extra_units) as f64;
    let denominator = 4.0 - 2.0 * eta * k;
    if denominator <= 0.0 {
        return Err(Error::Divergence(format!(
            "linear SCM has no stationary error for eta K = {} >= 2",
            eta * k
        )));
    }
    Ok(eta * sigma * sigma * k / denominator)
}

/// Both-layers Erf asymptote for a single teacher unit,
/// `eta (sigma v*)^2 / (2 sqrt 3 K pi)`.
pub fn eg_both_erf_m1(student_units: usize, eta: f64, sigma: f64, v_star: f64) -> Result<f64> {
    if student_units == 0 {
        return Err(Error::InvalidArgument(
            "the student needs at least one hidden unit".into(),
        ));
    }
    check_rates(eta, sigma)?;
    if !v_star.is_finite() {
        return Err(Error::NonFinite {
            context: "teacher second-layer weight",
        });
    }
    let noise = sigma * v_star;
    Ok(eta * noise * noise / (2.0 * 3f64.sqrt() * student_units as f64 * PI))
}

/// Asymptote of a noisy Erf perceptron with teacher norm `T`,
/// `eta sigma^2 (4T + 1) / (2 sqrt(2T + 1) (pi (4T + 1) - eta sqrt(8T^2 + 6T + 1)))`.
///
/// Fails with [`Error::Divergence`] when the denominator is not positive.
pub fn eg_perceptron(teacher_norm: f64, eta: f64, sigma: f64) -> Result<f64> {
    check_rates(eta, sigma)?;
    if !(teacher_norm.is_finite() && teacher_norm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "teacher norm must be positive, got {teacher_norm}"
        )));
    }
    let t = teacher_norm;
    let bracket = PI * (4.0 * t + 1.0) - eta * (8.0 * t * t + 6.0 * t + 1.0).sqrt();
    let denominator = 2.0 * (2.0 * t + 1.0).sqrt() * bracket;
    if denominator <= 0.0 {
        return Err(Error::Divergence(format!(
            "perceptron has no stationary error at eta = {eta}, T = {t}"
        )));
    }
    Ok(eta * sigma * sigma * (4.0 * t + 1.0) / denominator)
}

/// Largest learning rate with guaranteed exponential convergence of the
/// noiseless Erf SCM at `K = M`: `sqrt 3 pi / (M + 3 / sqrt 5 - 1)`.
pub fn eta_max(teacher_units: usize) -> Result<f64> {
    check_units(teacher_units)?;
    Ok(3f64.sqrt() * PI / (teacher_units as f64 + 3.0 / 5f64.sqrt() - 1.0))
}
