//! Finite-size deviation of SGD from the order-parameter ODEs.
//!
//! For every input dimension the student and teacher are built so that their
//! measured order parameters equal one fixed target exactly, then SGD and the
//! ODEs are run side by side. The maximum distance over `alpha in [0, horizon]`
//! is expected to shrink like `N^{-1/2}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::input::InputSource;
use super::run::run_from;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::macro_state::MacroState;
use crate::network::NetworkParams;
use crate::ode::{integrate_full, Integrator, OdeConfig, Trajectory};
use crate::rng::{derive_seed, rng_from, stream, SimRng};

/// ODE reference step.
const REFERENCE_D_ALPHA: f64 = 0.01;
/// Spacing of the compared snapshots in `alpha`.
const COMPARE_EVERY: f64 = 0.1;
/// Spread of the initial student-teacher overlaps of the target.
const TARGET_OVERLAP_STD: f64 = 0.1;

/// Deviation at one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Point {
    pub n: usize,
    /// Seed average of the per-seed maxima.
    pub mean_deviation: f64,
    pub per_seed: Vec<f64>,
}

/// Target initial state: `Q = T = I`, small Gaussian `R` drawn from `seed`,
/// second layers from `cfg`.
pub fn theorem1_target(cfg: &TrainConfig) -> Result<MacroState> {
    let (k, m) = (cfg.student_units, cfg.teacher_units);
    let mut rng = rng_from(cfg.seed, stream::DATASET);
    let r = DMatrix::from_fn(k, m, |_, _| {
        TARGET_OVERLAP_STD * rng.sample::<f64, _>(StandardNormal)
    });
    let state = MacroState::new(
        r,
        DMatrix::identity(k, k),
        DMatrix::identity(m, m),
        DVector::from_element(k, cfg.student_v),
        DVector::from_element(m, cfg.teacher_v),
    )?;
    state.validate()?;
    Ok(state)
}

/// Student and teacher in dimension `n` whose measured order parameters equal
/// `target` up to round-off.
///
/// With the field Gram matrix `G = V diag(l) V^T`, the rows are
/// `sqrt(n) V diag(sqrt l) U^T` for a random `n x (K+M)` matrix `U` with
/// orthonormal columns.
pub fn matched_pair(
    target: &MacroState,
    n: usize,
    rng: &mut SimRng,
) -> Result<(NetworkParams, NetworkParams)> {
    target.validate()?;
    let (k, m) = (target.k(), target.m());
    let fields = k + m;
    if n < fields {
        return Err(Error::InvalidArgument(format!(
            "need N >= K + M = {fields} to realise the target overlaps, got N = {n}"
        )));
    }
    let eigen = target.gram().symmetric_eigen();
    let factor = DMatrix::from_fn(fields, fields, |a, b| {
        eigen.eigenvectors[(a, b)] * eigen.eigenvalues[b].max(0.0).sqrt()
    });
    let gaussian = DMatrix::from_fn(n, fields, |_, _| rng.sample::<f64, _>(StandardNormal));
    let basis = gaussian.qr().q();
    let rows = factor * basis.transpose() * (n as f64).sqrt();
    let pick = |range: std::ops::Range<usize>| -> Vec<Vec<f64>> {
        range
            .map(|a| rows.row(a).iter().copied().collect())
            .collect()
    };
    let student = NetworkParams::from_rows(&pick(0..k), target.v.iter().copied().collect())?;
    let teacher =
        NetworkParams::from_rows(&pick(k..fields), target.v_star.iter().copied().collect())?;
    Ok((student, teacher))
}

/// Maximum distance between simulated and integrated order parameters over
/// `alpha in [0, horizon]`, averaged over `seeds` runs, for each dimension in
/// `dims`. Seeds are derived from `base.seed`; the ODE reference is RK4.
pub fn theorem1_deviation(
    base: &TrainConfig,
    dims: &[usize],
    horizon: f64,
    seeds: usize,
) -> Result<Vec<Theorem1Point>> {
    let base = base.validated()?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be finite and non-negative, got {horizon}"
        )));
    }
    if seeds == 0 || dims.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one seed and one input dimension".into(),
        ));
    }
    let target = theorem1_target(&base)?;
    let ode_cfg = OdeConfig {
        activation: base.activation,
        eta_w: base.eta_w,
        eta_v: base.eta_v,
        sigma: base.sigma,
        mode: base.mode,
        integrator: Integrator::Rk4,
        d_alpha: REFERENCE_D_ALPHA,
    };
    let reference =
        integrate_full(&target, &ode_cfg, horizon, REFERENCE_D_ALPHA)?.into_completed()?;

    dims.iter()
        .map(|&n| {
            let per_seed = (0..seeds as u64)
                .into_par_iter()
                .map(|s| {
                    let mut cfg = base.clone();
                    cfg.input_dim = n;
                    cfg.seed = derive_seed(base.seed, 1 + s);
                    cfg.steps = (horizon * n as f64).round() as u64;
                    one_seed(&cfg, &target, &reference)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean_deviation = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            Ok(Theorem1Point {
                n,
                mean_deviation,
                per_seed,
            })
        })
        .collect()
}

fn one_seed(
    cfg: &TrainConfig,
    target: &MacroState,
    reference: &Trajectory<MacroState>,
) -> Result<f64> {
    let n = cfg.input_dim;
    let mut rng = rng_from(cfg.seed, stream::STUDENT);
    let (student, teacher) = matched_pair(target, n, &mut rng)?;
    let stride = ((COMPARE_EVERY * n as f64).round() as u64).max(1);
    let trace = run_from(cfg, &teacher, student, &InputSource::GaussianStream, stride)?;
    let mut worst: f64 = 0.0;
    for rec in &trace.records {
        let expected = interpolate(reference, rec.alpha);
        let d = rec.macro_state.distance(&expected);
        worst = worst.max(if d.is_finite() { d } else { f64::INFINITY });
    }
    Ok(worst)
}

/// Linear interpolation of a uniformly recorded trajectory.
fn interpolate(traj: &Trajectory<MacroState>, alpha: f64) -> MacroState {
    let pts = &traj.points;
    let last = pts.len() - 1;
    let spacing = if last == 0 {
        1.0
    } else {
        pts[1].alpha - pts[0].alpha
    };
    let pos = (alpha / spacing).clamp(0.0, last as f64);
    let lo = (pos.floor() as usize).min(last);
    let hi = (lo + 1).min(last);
    let w = pos - lo as f64;
    let a = pts[lo].state.pack_dynamic();
    let b = pts[hi].state.pack_dynamic();
    let mixed: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (1.0 - w) * x + w * y)
        .collect();
    let mut out = pts[lo].state.clone();
    out.unpack_dynamic(&mixed);
    out
}
