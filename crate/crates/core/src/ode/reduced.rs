//! Eight-parameter reduction of the SCM dynamics for `K = M + L` students
//! learning a teacher with `T = I` and all second-layer weights equal to one.
//!
//! Students `0..M` are matched to teacher units, students `M..K` are surplus:
//!
//! ```text
//! Q_ij = Q (i = j < M), C (i != j < M), D (one index < M, the other >= M),
//!        E (i = j >= M), F (i != j >= M)
//! R_in = R (i = n),     S (i != n, i < M), U (i >= M)
//! ```

use nalgebra::{DMatrix, DVector};

use super::{rates_from_gram, MacroRate, OdeConfig};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::gen_error::gen_error_from_gram;
use crate::macro_state::MacroState;

/// Relative tolerance for reading a block-constant rate off the full ODEs.
pub(crate) const BLOCK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedScmState {
    pub q: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub r: f64,
    pub s: f64,
    pub u: f64,
}

impl ReducedScmState {
    /// Perfect specialisation: `Q = R = 1`, everything else zero.
    pub fn fixed_point() -> Self {
        Self {
            q: 1.0,
            r: 1.0,
            ..Self::default()
        }
    }

    /// `(Q, C, D, E, F, R, S, U)`.
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.q, self.c, self.d, self.e, self.f, self.r, self.s, self.u,
        ]
    }

    pub fn from_array(x: &[f64]) -> Self {
        Self {
            q: x[0],
            c: x[1],
            d: x[2],
            e: x[3],
            f: x[4],
            r: x[5],
            s: x[6],
            u: x[7],
        }
    }
}

/// Sizes of a reduced SCM system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ScmLayout {
    pub m: usize,
    pub l: usize,
}

impl ScmLayout {
    pub(crate) fn new(m: usize, l: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "the teacher needs at least one hidden unit".into(),
            ));
        }
        Ok(Self { m, l })
    }

    pub(crate) fn k(&self) -> usize {
        self.m + self.l
    }

    /// Which of `(Q, C, D, E, F, R, S, U)` correspond to entries that exist.
    pub(crate) fn active(&self) -> [bool; 8] {
        let (pairs, surplus, surplus_pairs) = (self.m >= 2, self.l >= 1, self.l >= 2);
        [
            true,
            pairs,
            surplus,
            surplus,
            surplus_pairs,
            true,
            pairs,
            surplus,
        ]
    }

    pub(crate) fn embed(&self, s: &ReducedScmState) -> MacroState {
        let (m, k) = (self.m, self.k());
        let q = DMatrix::from_fn(k, k, |i, j| match (i < m, j < m, i == j) {
            (true, true, true) => s.q,
            (true, true, false) => s.c,
            (false, false, true) => s.e,
            (false, false, false) => s.f,
            _ => s.d,
        });
        let r = DMatrix::from_fn(k, m, |i, n| {
            if i >= m {
                s.u
            } else if i == n {
                s.r
            } else {
                s.s
            }
        });
        MacroState {
            r,
            q,
            t: DMatrix::identity(m, m),
            v: DVector::from_element(k, 1.0),
            v_star: DVector::from_element(m, 1.0),
        }
    }

    /// Reads the block values off a full rate, checking every entry of each block.
    pub(crate) fn reduce(&self, rate: &MacroRate) -> Result<ReducedScmState> {
        let (m, k) = (self.m, self.k());
        let scale = rate.max_abs().max(1.0);
        let tol = BLOCK_TOL * scale;
        let mut blocks = [BlockAcc::default(); 8];
        for i in 0..k {
            for j in 0..k {
                let idx = match (i < m, j < m, i == j) {
                    (true, true, true) => 0,
                    (true, true, false) => 1,
                    (false, false, true) => 3,
                    (false, false, false) => 4,
                    _ => 2,
                };
                blocks[idx].push(rate.q[(i, j)]);
            }
            for n in 0..m {
                let idx = if i >= m {
                    7
                } else if i == n {
                    5
                } else {
                    6
                };
                blocks[idx].push(rate.r[(i, n)]);
            }
        }
        let mut out = [0.0; 8];
        for (p, acc) in blocks.iter().enumerate() {
            if acc.spread() > tol {
                return Err(Error::BlockInconsistency {
                    deviation: acc.spread(),
                });
            }
            out[p] = acc.first;
        }
        Ok(ReducedScmState::from_array(&out))
    }

    pub(crate) fn rhs(&self, s: &ReducedScmState, cfg: &OdeConfig) -> Result<ReducedScmState> {
        let state = self.embed(s);
        let rate = rates_from_gram(
            &state.gram(),
            state.v.as_slice(),
            state.v_star.as_slice(),
            &scm_only(cfg),
        )?;
        self.reduce(&rate)
    }

    pub(crate) fn gen_error(&self, s: &ReducedScmState, act: ActivationKind) -> Result<f64> {
        let state = self.embed(s);
        gen_error_from_gram(
            &state.gram(),
            state.v.as_slice(),
            state.v_star.as_slice(),
            act,
        )
    }
}

fn scm_only(cfg: &OdeConfig) -> OdeConfig {
    OdeConfig {
        eta_v: 0.0,
        mode: crate::config::Mode::Scm,
        ..*cfg
    }
}

#[derive(Debug, Clone, Copy)]
struct BlockAcc {
    first: f64,
    min: f64,
    max: f64,
    seen: bool,
}

impl Default for BlockAcc {
    fn default() -> Self {
        Self {
            first: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            seen: false,
        }
    }
}

impl BlockAcc {
    fn push(&mut self, x: f64) {
        if !self.seen {
            self.first = x;
            self.seen = true;
        }
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn spread(&self) -> f64 {
        if self.seen {
            self.max - self.min
        } else {
            0.0
        }
    }
}

/// Embeds a reduced state for `M` teacher and `M + L` student units with
/// `T = I` and unit second layers.
pub fn embed_scm(
    s: &ReducedScmState,
    teacher_units: usize,
    extra_units: usize,
) -> Result<MacroState> {
    Ok(ScmLayout::new(teacher_units, extra_units)?.embed(s))
}

/// Rate of the reduced SCM state, assembled from the full ODEs of the embedded
/// state. Parameters without a corresponding entry (for instance `F` when
/// `L < 2`) have zero rate.
pub fn reduced_scm_rhs(
    s: &ReducedScmState,
    teacher_units: usize,
    extra_units: usize,
    eta: f64,
    sigma: f64,
    activation: ActivationKind,
) -> Result<ReducedScmState> {
    let cfg = OdeConfig::scm(activation, eta, sigma);
    cfg.validate()?;
    ScmLayout::new(teacher_units, extra_units)?.rhs(s, &cfg)
}
