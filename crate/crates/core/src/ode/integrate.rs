use super::denoising::{denoising_rhs_packed, DenoisingLayout, DenoisingState};
use super::reduced::{ReducedScmState, ScmLayout};
use super::{rates_from_gram, OdeConfig};
use crate::error::{Error, Result};
use crate::gen_error::gen_error_from_gram;
use crate::macro_state::MacroState;

/// States whose Euclidean norm exceeds this abort the integration.
pub const BLOW_UP_NORM: f64 = 1e6;

/// Fixed-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint<S> {
    pub alpha: f64,
    pub state: S,
    pub eg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryOutcome {
    Completed,
    /// Norm above [`BLOW_UP_NORM`] or non-finite at this time.
    BlewUp {
        alpha: f64,
    },
    /// Right-hand side failed (for instance a moment left its domain).
    Failed {
        alpha: f64,
        error: Error,
    },
}

/// Recorded points of an integration, possibly cut short.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub points: Vec<TrajectoryPoint<S>>,
    pub outcome: TrajectoryOutcome,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &TrajectoryPoint<S> {
        self.points
            .last()
            .expect("a trajectory always holds its initial point")
    }

    pub fn completed(&self) -> bool {
        self.outcome == TrajectoryOutcome::Completed
    }

    /// `Ok(self)` if the integration reached its end, otherwise the reason as an error.
    pub fn into_completed(self) -> Result<Self> {
        match &self.outcome {
            TrajectoryOutcome::Completed => Ok(self),
            TrajectoryOutcome::BlewUp { alpha } => Err(Error::Divergence(format!(
                "state blew up at alpha = {alpha}"
            ))),
            TrajectoryOutcome::Failed { error, .. } => Err(error.clone()),
        }
    }
}

/// Integrates `dx/dalpha = rhs(x)` on packed state vectors from `alpha = 0`
/// to `alpha_max`, recording `(alpha, decode(x), eg(x))` every `record_every`
/// (rounded to whole steps) and at the end.
pub fn integrate<S>(
    x0: Vec<f64>,
    rhs: impl Fn(&[f64]) -> Result<Vec<f64>>,
    eg: impl Fn(&[f64]) -> Result<f64>,
    decode: impl Fn(&[f64]) -> S,
    integrator: Integrator,
    d_alpha: f64,
    alpha_max: f64,
    record_every: f64,
) -> Result<Trajectory<S>> {
    if !(d_alpha.is_finite() && d_alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "d_alpha must be positive, got {d_alpha}"
        )));
    }
    if !(alpha_max.is_finite() && alpha_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_max must be finite and non-negative, got {alpha_max}"
        )));
    }
    let steps = (alpha_max / d_alpha).round() as u64;
    let stride = ((record_every / d_alpha).round() as u64).max(1);
    let dim = x0.len();
    let mut x = x0;
    let mut points = vec![TrajectoryPoint {
        alpha: 0.0,
        state: decode(&x),
        eg: eg(&x)?,
    }];
    let mut scratch = vec![0.0; dim];

    for step in 1..=steps {
        let alpha = step as f64 * d_alpha;
        let advanced = match integrator {
            Integrator::Euler => rhs(&x).map(|f| {
                for (xi, fi) in x.iter_mut().zip(&f) {
                    *xi += d_alpha * fi;
                }
            }),
            Integrator::Rk4 => rk4_step(&rhs, &mut x, &mut scratch, d_alpha),
        };
        if let Err(error) = advanced {
            return Ok(Trajectory {
                points,
                outcome: TrajectoryOutcome::Failed { alpha, error },
            });
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > BLOW_UP_NORM {
            points.push(TrajectoryPoint {
                alpha,
                state: decode(&x),
                eg: f64::NAN,
            });
            return Ok(Trajectory {
                points,
                outcome: TrajectoryOutcome::BlewUp { alpha },
            });
        }
        if step % stride == 0 || step == steps {
            match eg(&x) {
                Ok(e) => points.push(TrajectoryPoint {
                    alpha,
                    state: decode(&x),
                    eg: e,
                }),
                Err(error) => {
                    return Ok(Trajectory {
                        points,
                        outcome: TrajectoryOutcome::Failed { alpha, error },
                    })
                }
            }
        }
    }
    Ok(Trajectory {
        points,
        outcome: TrajectoryOutcome::Completed,
    })
}

fn rk4_step(
    rhs: &impl Fn(&[f64]) -> Result<Vec<f64>>,
    x: &mut [f64],
    scratch: &mut [f64],
    h: f64,
) -> Result<()> {
    let k1 = rhs(x)?;
    for i in 0..x.len() {
        scratch[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = rhs(scratch)?;
    for i in 0..x.len() {
        scratch[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = rhs(scratch)?;
    for i in 0..x.len() {
        scratch[i] = x[i] + h * k3[i];
    }
    let k4 = rhs(scratch)?;
    for i in 0..x.len() {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Full ODEs from `m0`.
pub fn integrate_full(
    m0: &MacroState,
    cfg: &OdeConfig,
    alpha_max: f64,
    record_every: f64,
) -> Result<Trajectory<MacroState>> {
    cfg.validate()?;
    m0.validate()?;
    let template = m0.clone();
    let k = m0.k();
    let unpack = |x: &[f64]| {
        let mut m = template.clone();
        m.unpack_dynamic(x);
        m
    };
    let rhs = |x: &[f64]| {
        let m = unpack(x);
        rates_from_gram(&m.gram(), &x[x.len() - k..], m.v_star.as_slice(), cfg).map(|r| r.pack())
    };
    let eg = |x: &[f64]| {
        let m = unpack(x);
        gen_error_from_gram(
            &m.gram(),
            &x[x.len() - k..],
            m.v_star.as_slice(),
            cfg.activation,
        )
    };
    integrate(
        m0.pack_dynamic(),
        rhs,
        eg,
        unpack,
        cfg.integrator,
        cfg.d_alpha,
        alpha_max,
        record_every,
    )
}

/// Reduced eight-parameter SCM dynamics for `M` teacher and `M + L` student units.
pub fn integrate_reduced_scm(
    s0: &ReducedScmState,
    teacher_units: usize,
    extra_units: usize,
    cfg: &OdeConfig,
    alpha_max: f64,
    record_every: f64,
) -> Result<Trajectory<ReducedScmState>> {
    cfg.validate()?;
    let layout = ScmLayout::new(teacher_units, extra_units)?;
    let rhs = |x: &[f64]| {
        let s = ReducedScmState::from_array(x);
        layout.rhs(&s, cfg).map(|d| d.to_array().to_vec())
    };
    let eg = |x: &[f64]| layout.gen_error(&ReducedScmState::from_array(x), cfg.activation);
    integrate(
        s0.to_array().to_vec(),
        rhs,
        eg,
        ReducedScmState::from_array,
        cfg.integrator,
        cfg.d_alpha,
        alpha_max,
        record_every,
    )
}

/// Denoising-ansatz dynamics for `K = groups * M` students.
pub fn integrate_denoising(
    s0: &DenoisingState,
    teacher_units: usize,
    groups: usize,
    v_star: f64,
    cfg: &OdeConfig,
    alpha_max: f64,
    record_every: f64,
) -> Result<Trajectory<DenoisingState>> {
    cfg.validate()?;
    let layout = DenoisingLayout::new(teacher_units, groups, v_star)?;
    let rhs = |x: &[f64]| denoising_rhs_packed(&layout, x, cfg);
    let eg = |x: &[f64]| layout.gen_error(&DenoisingState::from_array(x), cfg.activation);
    integrate(
        s0.to_array().to_vec(),
        rhs,
        eg,
        DenoisingState::from_array,
        cfg.integrator,
        cfg.d_alpha,
        alpha_max,
        record_every,
    )
}
