//! Deterministic order-parameter dynamics in the limit `N -> infinity`.
//!
//! With signed readout weights `u = (v, -v*)` over all fields (students first)
//! and `I3(i, x, a)`, `I4(i, k, a, b)`, `J2(i, k)`, `I2(i, a)` the Gaussian
//! moments of the local fields, the rates per unit `alpha` are
//!
//! ```text
//! dR_in/da = -eta_w v_i sum_a u_a I3(i, n, a)
//! dQ_ik/da = -eta_w v_i sum_a u_a I3(i, k, a) - eta_w v_k sum_a u_a I3(k, i, a)
//!            + eta_w^2 v_i v_k [ sum_ab u_a u_b I4(i, k, a, b) + sigma^2 J2(i, k) ]
//! dv_i/da  = -eta_v sum_a u_a I2(i, a)
//! ```
//!
//! which is the teacher-sum-minus-student-sum form obtained from the SGD
//! update with `Delta = phi_student - phi_teacher - sigma zeta`.

mod denoising;
mod integrate;
mod perturbative;
mod reduced;

pub use denoising::{denoising_rhs, embed_denoising, DenoisingState};
pub use integrate::{
    integrate, integrate_denoising, integrate_full, integrate_reduced_scm, Integrator, Trajectory,
    TrajectoryOutcome, TrajectoryPoint,
};
pub use perturbative::{
    perturbative_eg, perturbative_solve, PerturbativeSolution, PerturbativeSystem,
};
pub use reduced::{embed_scm, reduced_scm_rhs, ReducedScmState};

use nalgebra::{DMatrix, DVector};

use crate::activation::ActivationKind;
use crate::config::Mode;
use crate::error::{Error, Result};
use crate::macro_state::MacroState;
use crate::moments::{self, CovBlock};

/// Parameters of the macroscopic dynamics. Sizes, `T` and `v*` are carried by
/// the state itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub activation: ActivationKind,
    pub eta_w: f64,
    pub eta_v: f64,
    pub sigma: f64,
    pub mode: Mode,
    pub integrator: Integrator,
    pub d_alpha: f64,
}

impl OdeConfig {
    /// SCM dynamics with forward Euler at `d_alpha = 1e-3`.
    pub fn scm(activation: ActivationKind, eta: f64, sigma: f64) -> Self {
        Self {
            activation,
            eta_w: eta,
            eta_v: 0.0,
            sigma,
            mode: Mode::Scm,
            integrator: Integrator::Euler,
            d_alpha: 1e-3,
        }
    }

    /// Both layers trained with a common learning rate.
    pub fn both_layers(activation: ActivationKind, eta: f64, sigma: f64) -> Self {
        Self {
            eta_v: eta,
            mode: Mode::BothLayers,
            ..Self::scm(activation, eta, sigma)
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator, d_alpha: f64) -> Self {
        self.integrator = integrator;
        self.d_alpha = d_alpha;
        self
    }

    pub fn effective_eta_v(&self) -> f64 {
        match self.mode {
            Mode::Scm => 0.0,
            Mode::BothLayers => self.eta_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("eta_w", self.eta_w),
            ("eta_v", self.eta_v),
            ("sigma", self.sigma),
        ] {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {x}"
                )));
            }
        }
        if !(self.d_alpha.is_finite() && self.d_alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "d_alpha must be positive, got {}",
                self.d_alpha
            )));
        }
        Ok(())
    }
}

/// Time derivative of the dynamic order parameters (`T` and `v*` are constant).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroRate {
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub v: DVector<f64>,
}

impl MacroRate {
    pub fn max_abs(&self) -> f64 {
        self.r.amax().max(self.q.amax()).max(self.v.amax())
    }

    /// Packed in the order of [`MacroState::pack_dynamic`].
    pub fn pack(&self) -> Vec<f64> {
        let (k, m) = (self.q.nrows(), self.r.ncols());
        let mut out = Vec::with_capacity(k * m + k * (k + 1) / 2 + k);
        for i in 0..k {
            for n in 0..m {
                out.push(self.r[(i, n)]);
            }
        }
        for i in 0..k {
            for j in i..k {
                out.push(self.q[(i, j)]);
            }
        }
        out.extend(self.v.iter());
        out
    }
}

/// Right-hand side of the full order-parameter ODEs.
pub fn full_rhs(m: &MacroState, cfg: &OdeConfig) -> Result<MacroRate> {
    cfg.validate()?;
    m.validate()?;
    rates_from_gram(&m.gram(), m.v.as_slice(), m.v_star.as_slice(), cfg)
}

/// [`full_rhs`] without validating the state.
pub(crate) fn rates_from_gram(
    gram: &DMatrix<f64>,
    v: &[f64],
    v_star: &[f64],
    cfg: &OdeConfig,
) -> Result<MacroRate> {
    let k = v.len();
    let m = v_star.len();
    let n = k + m;
    let act = cfg.activation;
    let u: Vec<f64> = v.iter().copied().chain(v_star.iter().map(|x| -x)).collect();
    let eta_w = cfg.eta_w;
    let eta_v = cfg.effective_eta_v();

    let i3 = |a: usize, b: usize, c: usize| moments::i3(&CovBlock::select(gram, &[a, b, c]), act);
    let i4 = |a: usize, b: usize, c: usize, d: usize| {
        moments::i4(&CovBlock::select(gram, &[a, b, c, d]), act)
    };

    // drift[i][x] = sum_a u_a I3(i, x, a)
    let mut drift = DMatrix::zeros(k, n);
    if eta_w != 0.0 {
        for i in 0..k {
            for x in 0..n {
                let mut s = 0.0;
                for (a, &ua) in u.iter().enumerate() {
                    if ua != 0.0 {
                        s += ua * i3(i, x, a)?;
                    }
                }
                drift[(i, x)] = s;
            }
        }
    }

    let mut r = DMatrix::zeros(k, m);
    for i in 0..k {
        for t in 0..m {
            r[(i, t)] = -eta_w * v[i] * drift[(i, k + t)];
        }
    }

    let mut q = DMatrix::zeros(k, k);
    let noise = cfg.sigma * cfg.sigma;
    for i in 0..k {
        for j in i..k {
            let mut rate = -eta_w * (v[i] * drift[(i, j)] + v[j] * drift[(j, i)]);
            let pref = eta_w * eta_w * v[i] * v[j];
            if pref != 0.0 {
                let mut quad = 0.0;
                for a in 0..n {
                    if u[a] == 0.0 {
                        continue;
                    }
                    quad += u[a] * u[a] * i4(i, j, a, a)?;
                    for b in a + 1..n {
                        if u[b] != 0.0 {
                            quad += 2.0 * u[a] * u[b] * i4(i, j, a, b)?;
                        }
                    }
                }
                if noise != 0.0 {
                    quad += noise * moments::j2(&CovBlock::select(gram, &[i, j]), act)?;
                }
                rate += pref * quad;
            }
            q[(i, j)] = rate;
            q[(j, i)] = rate;
        }
    }

    let mut dv = DVector::zeros(k);
    if eta_v != 0.0 {
        for i in 0..k {
            let mut s = 0.0;
            for (a, &ua) in u.iter().enumerate() {
                if ua != 0.0 {
                    s += ua * moments::i2(&CovBlock::select(gram, &[i, a]), act)?;
                }
            }
            dv[i] = -eta_v * s;
        }
    }
    Ok(MacroRate { r, q, v: dv })
}

#[cfg(test)]
mod tests;
