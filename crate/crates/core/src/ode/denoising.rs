//! Denoising ansatz for `K = Z M` students trained on both layers: student `i`
//! belongs to group `i mod M`, which estimates teacher unit `i mod M`.
//!
//! ```text
//! Q_ij = q if i mod M = j mod M, else c
//! R_in = r if i mod M = n,       else s
//! v_i  = v for every student
//! ```
//!
//! `T = I` and every teacher unit has second-layer weight `v*`.

use nalgebra::{DMatrix, DVector};

use super::{rates_from_gram, MacroRate, OdeConfig};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::gen_error::gen_error_from_gram;
use crate::macro_state::MacroState;

use super::reduced::BLOCK_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DenoisingState {
    pub q: f64,
    pub c: f64,
    pub r: f64,
    pub s: f64,
    pub v: f64,
}

impl DenoisingState {
    /// Noiseless fixed point: every group copies its teacher unit and shares
    /// its weight equally, `v = v* / Z`.
    pub fn fixed_point(groups: usize, v_star: f64) -> Self {
        Self {
            q: 1.0,
            c: 0.0,
            r: 1.0,
            s: 0.0,
            v: v_star / groups as f64,
        }
    }

    /// `(q, c, r, s, v)`.
    pub fn to_array(&self) -> [f64; 5] {
        [self.q, self.c, self.r, self.s, self.v]
    }

    pub fn from_array(x: &[f64]) -> Self {
        Self {
            q: x[0],
            c: x[1],
            r: x[2],
            s: x[3],
            v: x[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DenoisingLayout {
    pub m: usize,
    pub z: usize,
    pub v_star: f64,
}

impl DenoisingLayout {
    pub(crate) fn new(m: usize, z: usize, v_star: f64) -> Result<Self> {
        if m == 0 || z == 0 {
            return Err(Error::InvalidArgument(format!(
                "denoising ansatz needs M >= 1 and Z >= 1, got M = {m}, Z = {z}"
            )));
        }
        if !v_star.is_finite() {
            return Err(Error::NonFinite {
                context: "teacher second-layer weight",
            });
        }
        Ok(Self { m, z, v_star })
    }

    pub(crate) fn k(&self) -> usize {
        self.m * self.z
    }

    /// Which of `(q, c, r, s, v)` are free: `c` and `s` need two teacher units,
    /// `v` moves only if the second layer is trained.
    pub(crate) fn active(&self, eta_v: f64) -> [bool; 5] {
        let pairs = self.m >= 2;
        [true, pairs, true, pairs, eta_v > 0.0]
    }

    pub(crate) fn embed(&self, s: &DenoisingState) -> MacroState {
        let (m, k) = (self.m, self.k());
        MacroState {
            r: DMatrix::from_fn(k, m, |i, n| if i % m == n { s.r } else { s.s }),
            q: DMatrix::from_fn(k, k, |i, j| if i % m == j % m { s.q } else { s.c }),
            t: DMatrix::identity(m, m),
            v: DVector::from_element(k, s.v),
            v_star: DVector::from_element(m, self.v_star),
        }
    }

    pub(crate) fn reduce(&self, rate: &MacroRate) -> Result<DenoisingState> {
        let (m, k) = (self.m, self.k());
        let tol = BLOCK_TOL * rate.max_abs().max(1.0);
        let mut lo = [f64::INFINITY; 5];
        let mut hi = [f64::NEG_INFINITY; 5];
        let mut rep = [None; 5];
        let mut push = |p: usize, x: f64| {
            lo[p] = lo[p].min(x);
            hi[p] = hi[p].max(x);
            rep[p].get_or_insert(x);
        };
        for i in 0..k {
            for j in 0..k {
                push(if i % m == j % m { 0 } else { 1 }, rate.q[(i, j)]);
            }
            for n in 0..m {
                push(if i % m == n { 2 } else { 3 }, rate.r[(i, n)]);
            }
            push(4, rate.v[i]);
        }
        let mut out = [0.0; 5];
        for p in 0..5 {
            if let Some(x) = rep[p] {
                let spread = hi[p] - lo[p];
                if spread > tol {
                    return Err(Error::BlockInconsistency { deviation: spread });
                }
                out[p] = x;
            }
        }
        Ok(DenoisingState::from_array(&out))
    }

    pub(crate) fn rhs(&self, s: &DenoisingState, cfg: &OdeConfig) -> Result<DenoisingState> {
        let state = self.embed(s);
        let rate = rates_from_gram(
            &state.gram(),
            state.v.as_slice(),
            state.v_star.as_slice(),
            cfg,
        )?;
        self.reduce(&rate)
    }

    pub(crate) fn gen_error(&self, s: &DenoisingState, act: ActivationKind) -> Result<f64> {
        let state = self.embed(s);
        gen_error_from_gram(
            &state.gram(),
            state.v.as_slice(),
            state.v_star.as_slice(),
            act,
        )
    }
}

pub(crate) fn denoising_rhs_packed(
    layout: &DenoisingLayout,
    x: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<f64>> {
    layout
        .rhs(&DenoisingState::from_array(x), cfg)
        .map(|d| d.to_array().to_vec())
}

/// Embeds a denoising state for `M` teacher units and `Z` students per unit.
pub fn embed_denoising(
    s: &DenoisingState,
    teacher_units: usize,
    groups: usize,
    v_star: f64,
) -> Result<MacroState> {
    Ok(DenoisingLayout::new(teacher_units, groups, v_star)?.embed(s))
}

/// Rate of the denoising state from the full Erf ODEs of the embedded state,
/// with both layers trained.
pub fn denoising_rhs(
    s: &DenoisingState,
    teacher_units: usize,
    groups: usize,
    eta_w: f64,
    eta_v: f64,
    sigma: f64,
    v_star: f64,
) -> Result<DenoisingState> {
    let cfg = OdeConfig {
        eta_v,
        ..OdeConfig::both_layers(ActivationKind::Erf, eta_w, sigma)
    };
    cfg.validate()?;
    DenoisingLayout::new(teacher_units, groups, v_star)?.rhs(s, &cfg)
}
