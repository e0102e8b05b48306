//! Gaussian moment integrals that close the order-parameter dynamics.
//!
//! All functions return the plain expectation over a zero-mean Gaussian
//! vector with covariance `cov`:
//!
//! | name | integrand | fields |
//! |------|-----------|--------|
//! | `i2` | `g(a) g(b)` | 2 |
//! | `j2` | `g'(a) g'(b)` | 2 |
//! | `i3` | `g'(a) b g(c)` | 3 |
//! | `i4` | `g'(a) g'(b) g(c) g(d)` | 4 |
//!
//! Erf and linear activations use closed forms. ReLU moments other than
//! `j2` go through [`quadrature`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

mod monte_carlo;
pub mod quadrature;

pub use monte_carlo::mc_moment;
use quadrature::Factor;

/// Tolerance on arcsin arguments and on discriminants that should be positive.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Nodes per smooth piece used by the ReLU quadrature. The four-field rule
/// nests three levels deep, and 32 nodes already reach round-off there.
pub fn default_quadrature_nodes(kind: MomentKind) -> usize {
    match kind {
        MomentKind::I4 => 32,
        _ => 64,
    }
}

/// Symmetric covariance of 2 to 4 jointly Gaussian fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovBlock {
    dim: usize,
    c: [[f64; 4]; 4],
}

impl CovBlock {
    /// Random block with variances uniform in `[0.1, 3]` and correlations of
    /// a Gaussian Gram matrix.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "covariance dimension {dim} not in 2..=4"
            )));
        }
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let gram = &a * a.transpose();
        let sd: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(0.1..3.0f64).sqrt())
            .collect();
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let corr = if i == j {
                    1.0
                } else {
                    gram[(i, j)] / (gram[(i, i)] * gram[(j, j)]).sqrt()
                };
                entries[i * dim + j] = corr * sd[i] * sd[j];
            }
        }
        Self::new(dim, &entries)
    }

    /// Builds a validated block from a row-major `dim x dim` slice.
    pub fn new(dim: usize, entries: &[f64]) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "covariance dimension {dim} not in 2..=4"
            )));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "covariance entries",
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let block = Self::from_fn(dim, |a, b| entries[a * dim + b]);
        block.validate()?;
        Ok(block)
    }

    /// Unvalidated constructor used on hot paths where the caller already
    /// holds a Gram matrix.
    #[inline]
    pub(crate) fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut c = [[0.0; 4]; 4];
        for (a, row) in c.iter_mut().enumerate().take(dim) {
            for (b, x) in row.iter_mut().enumerate().take(dim) {
                *x = f(a, b);
            }
        }
        Self { dim, c }
    }

    /// Sub-block of a Gram matrix picking the fields `idx`.
    #[inline]
    pub(crate) fn select(gram: &DMatrix<f64>, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| gram[(idx[a], idx[b])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(a, b)`, zero-based.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.c[a][b]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| self.c[a][b])
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.to_matrix();
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "covariance",
            });
        }
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance not symmetric ({asym:e})"
            )));
        }
        let min_eig = m.symmetric_eigenvalues().min();
        if min_eig < -DOMAIN_TOL {
            return Err(Error::NotPositiveSemiDefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(())
    }

    /// The block with fields reordered: new field `a` is old field `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim, |a, b| self.c[perm[a]][perm[b]])
    }

    fn expect_dim(&self, kind: MomentKind) -> Result<()> {
        if self.dim == kind.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: kind.name(),
                expected: kind.dim(),
                found: self.dim,
            })
        }
    }
}

/// Which moment integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentKind {
    I2,
    I3,
    I4,
    J2,
}

impl MomentKind {
    pub const ALL: [MomentKind; 4] = [Self::I2, Self::I3, Self::I4, Self::J2];

    pub fn dim(self) -> usize {
        match self {
            Self::I2 | Self::J2 => 2,
            Self::I3 => 3,
            Self::I4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::I2 => "I2",
            Self::I3 => "I3",
            Self::I4 => "I4",
            Self::J2 => "J2",
        }
    }

    /// Integrand evaluated at one realisation of the fields.
    #[inline]
    pub fn integrand(self, act: ActivationKind, x: &[f64]) -> f64 {
        match self {
            Self::I2 => act.g(x[0]) * act.g(x[1]),
            Self::J2 => act.g_prime(x[0]) * act.g_prime(x[1]),
            Self::I3 => act.g_prime(x[0]) * x[1] * act.g(x[2]),
            Self::I4 => act.g_prime(x[0]) * act.g_prime(x[1]) * act.g(x[2]) * act.g(x[3]),
        }
    }

    fn relu_factors(self) -> &'static [Factor] {
        match self {
            Self::I2 => &[Factor::Ramp, Factor::Ramp],
            Self::J2 => &[Factor::Step, Factor::Step],
            Self::I3 => &[Factor::Step, Factor::Identity, Factor::Ramp],
            Self::I4 => &[Factor::Step, Factor::Step, Factor::Ramp, Factor::Ramp],
        }
    }
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MomentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I2" => Ok(Self::I2),
            "I3" => Ok(Self::I3),
            "I4" => Ok(Self::I4),
            "J2" => Ok(Self::J2),
            other => Err(Error::InvalidArgument(format!("unknown moment '{other}'"))),
        }
    }
}

/// Evaluates any of the four moments.
pub fn moment(kind: MomentKind, cov: &CovBlock, act: ActivationKind) -> Result<f64> {
    match kind {
        MomentKind::I2 => i2(cov, act),
        MomentKind::I3 => i3(cov, act),
        MomentKind::I4 => i4(cov, act),
        MomentKind::J2 => j2(cov, act),
    }
}

/// Same as [`moment`] but with an explicit node count for the ReLU quadrature.
pub fn moment_with_nodes(
    kind: MomentKind,
    cov: &CovBlock,
    act: ActivationKind,
    nodes: usize,
) -> Result<f64> {
    if act == ActivationKind::Relu && kind != MomentKind::J2 {
        cov.expect_dim(kind)?;
        let canonical = canonical_order(kind, cov);
        Ok(quadrature::gaussian_expectation(
            &canonical,
            kind.relu_factors(),
            nodes,
        ))
    } else {
        moment(kind, cov, act)
    }
}

/// Reorders the fields within each exchangeable pair by a swap-invariant key,
/// so the quadrature grid and hence the result are exactly symmetric.
fn canonical_order(kind: MomentKind, cov: &CovBlock) -> CovBlock {
    let key = |a: usize, others: [usize; 2]| {
        let (x, y) = (cov.get(a, others[0]), cov.get(a, others[1]));
        (cov.get(a, a), x + y, x * y)
    };
    let ordered = |a: usize, b: usize, others: [usize; 2]| {
        let swap = key(a, others).partial_cmp(&key(b, others)) == Some(std::cmp::Ordering::Greater);
        if swap {
            [b, a]
        } else {
            [a, b]
        }
    };
    match kind {
        MomentKind::I2 | MomentKind::J2 => {
            let [a, b] = if cov.get(0, 0) > cov.get(1, 1) {
                [1, 0]
            } else {
                [0, 1]
            };
            cov.permuted(&[a, b])
        }
        MomentKind::I4 => {
            let [a, b] = ordered(0, 1, [2, 3]);
            let [c, d] = ordered(2, 3, [0, 1]);
            cov.permuted(&[a, b, c, d])
        }
        MomentKind::I3 => cov.clone(),
    }
}

/// `arcsin` with arguments within [`DOMAIN_TOL`] of `[-1, 1]` clamped.
fn clamped_asin(kind: &'static str, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_TOL {
        return Err(Error::MomentDomain {
            kind,
            detail: format!("arcsin argument {x}"),
        });
    }
    Ok(x.clamp(-1.0, 1.0).asin())
}

fn positive(kind: &'static str, what: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else if x.is_finite() && x > -DOMAIN_TOL {
        Err(Error::MomentDomain {
            kind,
            detail: format!("{what} = {x:e} vanishes"),
        })
    } else {
        Err(Error::MomentDomain {
            kind,
            detail: format!("{what} = {x:e} is negative"),
        })
    }
}

/// `<g(a) g(b)>`.
pub fn i2(cov: &CovBlock, act: ActivationKind) -> Result<f64> {
    cov.expect_dim(MomentKind::I2)?;
    match act {
        ActivationKind::Erf => erf_i2(cov),
        ActivationKind::Linear => Ok(cov.get(0, 1)),
        ActivationKind::Relu => moment_with_nodes(
            MomentKind::I2,
            cov,
            act,
            default_quadrature_nodes(MomentKind::I2),
        ),
    }
}

/// `<g'(a) g'(b)>`.
pub fn j2(cov: &CovBlock, act: ActivationKind) -> Result<f64> {
    cov.expect_dim(MomentKind::J2)?;
    match act {
        ActivationKind::Erf => erf_j2(cov),
        ActivationKind::Linear => Ok(1.0),
        ActivationKind::Relu => {
            let (c11, c22, c12) = (cov.get(0, 0), cov.get(1, 1), cov.get(0, 1));
            if c11 <= 0.0 || c22 <= 0.0 {
                // a pinned field sits on the kink, where g' = 0
                return Ok(0.0);
            }
            let rho = clamped_asin("J2", c12 / (c11 * c22).sqrt())?;
            Ok(0.25 + rho / (2.0 * PI))
        }
    }
}

/// `<g'(a) b g(c)>`.
pub fn i3(cov: &CovBlock, act: ActivationKind) -> Result<f64> {
    cov.expect_dim(MomentKind::I3)?;
    match act {
        ActivationKind::Erf => erf_i3(cov),
        ActivationKind::Linear => Ok(cov.get(1, 2)),
        ActivationKind::Relu => moment_with_nodes(
            MomentKind::I3,
            cov,
            act,
            default_quadrature_nodes(MomentKind::I3),
        ),
    }
}

/// `<g'(a) g'(b) g(c) g(d)>`.
pub fn i4(cov: &CovBlock, act: ActivationKind) -> Result<f64> {
    cov.expect_dim(MomentKind::I4)?;
    match act {
        ActivationKind::Erf => erf_i4(cov),
        ActivationKind::Linear => Ok(cov.get(2, 3)),
        ActivationKind::Relu => moment_with_nodes(
            MomentKind::I4,
            cov,
            act,
            default_quadrature_nodes(MomentKind::I4),
        ),
    }
}

#[inline]
pub(crate) fn erf_i2(cov: &CovBlock) -> Result<f64> {
    let (c11, c22, c12) = (cov.get(0, 0), cov.get(1, 1), cov.get(0, 1));
    let arg = c12 / ((1.0 + c11) * (1.0 + c22)).sqrt();
    Ok(2.0 / PI * clamped_asin("I2", arg)?)
}

#[inline]
pub(crate) fn erf_j2(cov: &CovBlock) -> Result<f64> {
    let (c11, c22, c12) = (cov.get(0, 0), cov.get(1, 1), cov.get(0, 1));
    let disc = positive(
        "J2",
        "discriminant",
        1.0 + c11 + c22 + c11 * c22 - c12 * c12,
    )?;
    Ok(2.0 / PI / disc.sqrt())
}

#[inline]
pub(crate) fn erf_i3(cov: &CovBlock) -> Result<f64> {
    let c = |a: usize, b: usize| cov.get(a - 1, b - 1);
    let lambda3 = positive(
        "I3",
        "Lambda3",
        (1.0 + c(1, 1)) * (1.0 + c(3, 3)) - c(1, 3) * c(1, 3),
    )?;
    Ok(
        2.0 / PI / lambda3.sqrt() * (c(2, 3) * (1.0 + c(1, 1)) - c(1, 2) * c(1, 3))
            / (1.0 + c(1, 1)),
    )
}

#[inline]
pub(crate) fn erf_i4(cov: &CovBlock) -> Result<f64> {
    let c = |a: usize, b: usize| cov.get(a - 1, b - 1);
    let lambda4 = positive(
        "I4",
        "Lambda4",
        (1.0 + c(1, 1)) * (1.0 + c(2, 2)) - c(1, 2) * c(1, 2),
    )?;
    let lambda0 = lambda4 * c(3, 4)
        - c(2, 3) * c(2, 4) * (1.0 + c(1, 1))
        - c(1, 3) * c(1, 4) * (1.0 + c(2, 2))
        + c(1, 2) * c(1, 3) * c(2, 4)
        + c(1, 2) * c(1, 4) * c(2, 3);
    let lambda1 = lambda4 * (1.0 + c(3, 3))
        - c(2, 3) * c(2, 3) * (1.0 + c(1, 1))
        - c(1, 3) * c(1, 3) * (1.0 + c(2, 2))
        + 2.0 * c(1, 2) * c(1, 3) * c(2, 3);
    let lambda2 = lambda4 * (1.0 + c(4, 4))
        - c(2, 4) * c(2, 4) * (1.0 + c(1, 1))
        - c(1, 4) * c(1, 4) * (1.0 + c(2, 2))
        + 2.0 * c(1, 2) * c(1, 4) * c(2, 4);
    let denom = positive("I4", "Lambda1 Lambda2", lambda1 * lambda2)?;
    let arg = lambda0 / denom.sqrt();
    Ok(4.0 / (PI * PI) / lambda4.sqrt() * clamped_asin("I4", arg)?)
}
