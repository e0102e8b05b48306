//! Generalisation error `eps_g = E[(phi_student - phi_teacher)^2] / 2` over
//! standard Gaussian inputs.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::activation::ActivationKind;
use crate::error::{check_dim, Error, Result};
use crate::macro_state::{measure_macro, MacroState};
use crate::moments::{self, CovBlock};
use crate::network::NetworkParams;
use crate::rng::SimRng;

/// Generalisation error from the order parameters alone.
///
/// Validates the state first; non-PSD overlaps beyond tolerance are an error.
pub fn gen_error_analytic(m: &MacroState, act: ActivationKind) -> Result<f64> {
    m.validate()?;
    gen_error_from_gram(&m.gram(), m.v.as_slice(), m.v_star.as_slice(), act)
}

/// Same quantity from a precomputed Gram matrix, students first. No PSD check;
/// moment-domain violations still surface as errors.
pub(crate) fn gen_error_from_gram(
    gram: &DMatrix<f64>,
    v: &[f64],
    v_star: &[f64],
    act: ActivationKind,
) -> Result<f64> {
    let k = v.len();
    let n = k + v_star.len();
    check_dim("Gram matrix", n, gram.nrows())?;
    // signed readout weights: the error is (sum_a u_a g(x_a)) with u = (v, -v*)
    let u = |a: usize| if a < k { v[a] } else { -v_star[a - k] };
    let mut total = 0.0;
    for a in 0..n {
        for b in a..n {
            let weight = if a == b {
                u(a) * u(a)
            } else {
                2.0 * u(a) * u(b)
            };
            if weight == 0.0 {
                continue;
            }
            total += weight * second_moment(gram, a, b, act)?;
        }
    }
    Ok(0.5 * total)
}

#[inline]
fn second_moment(gram: &DMatrix<f64>, a: usize, b: usize, act: ActivationKind) -> Result<f64> {
    let (caa, cbb, cab) = (gram[(a, a)], gram[(b, b)], gram[(a, b)]);
    match act {
        ActivationKind::Linear => Ok(cab),
        ActivationKind::Erf => {
            let arg = cab / ((1.0 + caa) * (1.0 + cbb)).sqrt();
            if !arg.is_finite() || arg.abs() > 1.0 + moments::DOMAIN_TOL {
                return Err(Error::MomentDomain {
                    kind: "I2",
                    detail: format!("arcsin argument {arg}"),
                });
            }
            Ok(2.0 / PI * arg.clamp(-1.0, 1.0).asin())
        }
        ActivationKind::Relu => moments::i2(&CovBlock::select(gram, &[a, b]), act),
    }
}

fn mc_input_check(
    student: &NetworkParams,
    teacher: &NetworkParams,
    n_samples: usize,
) -> Result<()> {
    check_dim("input dimension", teacher.input_dim(), student.input_dim())?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    Ok(())
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Monte Carlo estimate of the generalisation error and its standard error,
/// drawing full `N`-dimensional inputs.
pub fn gen_error_mc(
    student: &NetworkParams,
    teacher: &NetworkParams,
    act: ActivationKind,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    mc_input_check(student, teacher, n_samples)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut x = vec![0.0; student.input_dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        for xi in x.iter_mut() {
            *xi = rng.sample(StandardNormal);
        }
        let d = student.forward_unchecked(&x, act) - teacher.forward_unchecked(&x, act);
        let e = 0.5 * d * d;
        sum += e;
        sum_sq += e * e;
    }
    Ok(mean_and_stderr(sum, sum_sq, n_samples))
}

/// Monte Carlo estimate that samples only the component of the input inside
/// the span of all weight rows.
///
/// The local fields see nothing else, so the estimator has the same
/// distribution as [`gen_error_mc`] at a cost independent of `N`. Falls back to
/// full inputs when the rows outnumber the input dimension.
pub fn gen_error_mc_projected(
    student: &NetworkParams,
    teacher: &NetworkParams,
    act: ActivationKind,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    mc_input_check(student, teacher, n_samples)?;
    let (k, m, n) = (
        student.hidden_units(),
        teacher.hidden_units(),
        student.input_dim(),
    );
    let rows = k + m;
    if rows >= n {
        return gen_error_mc(student, teacher, act, n_samples, seed);
    }
    let weights = DMatrix::from_fn(rows, n, |r, j| {
        if r < k {
            student.row(r)[j]
        } else {
            teacher.row(r - k)[j]
        }
    });
    let basis = weights.transpose().qr().q();
    // fields = P z with z ~ N(0, I_rows)
    let proj = (&weights * basis) / (n as f64).sqrt();
    let v = student.second_layer();
    let v_star = teacher.second_layer();

    let mut rng = SimRng::seed_from_u64(seed);
    let mut z = DVector::zeros(rows);
    let mut fields = DVector::zeros(rows);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        proj.mul_to(&z, &mut fields);
        let mut d = 0.0;
        for a in 0..k {
            d += v[a] * act.g(fields[a]);
        }
        for b in 0..m {
            d -= v_star[b] * act.g(fields[k + b]);
        }
        let e = 0.5 * d * d;
        sum += e;
        sum_sq += e * e;
    }
    Ok(mean_and_stderr(sum, sum_sq, n_samples))
}

/// Analytic error of a student against a teacher, via measured overlaps.
pub fn gen_error_of(
    student: &NetworkParams,
    teacher: &NetworkParams,
    act: ActivationKind,
) -> Result<f64> {
    let m = measure_macro(student, teacher)?;
    gen_error_from_gram(&m.gram(), m.v.as_slice(), m.v_star.as_slice(), act)
}

/// Empirical mean of `(phi_student - y)^2 / 2` over labelled inputs.
pub fn empirical_loss(
    student: &NetworkParams,
    inputs: &[f64],
    labels: &[f64],
    act: ActivationKind,
) -> f64 {
    let n = student.input_dim();
    let total: f64 = inputs
        .chunks_exact(n)
        .zip(labels)
        .map(|(x, y)| {
            let d = student.forward_unchecked(x, act) - y;
            0.5 * d * d
        })
        .sum();
    total / labels.len().max(1) as f64
}
