//! Kink-aware Gaussian quadrature for piecewise-polynomial integrands.
//!
//! The integrand is a product of one-dimensional factors `h_j(x_j)` of the
//! Gaussian fields, each of which is a step `1[x > 0]`, a ramp `max(x, 0)` or
//! the identity. Writing the fields as `x = L z` with `L` a (semi-definite)
//! Cholesky factor and `z` standard normal, the field `x_j` depends on
//! `z_1..z_j` only, so when the outer variables are fixed each factor has at
//! most one kink in the variable being integrated, at a known location.
//!
//! The outer variables are integrated with Gauss-Legendre rules on the
//! truncated line `[-9, 9]`, split at every kink so that each piece is smooth.
//! A kinked field that also depends on later variables turns into a kink
//! smoothed over the width of its conditional spread; narrow ones get extra
//! breakpoints around their centre.
//! The innermost variable is integrated in closed form: on every piece the
//! integrand is a polynomial, and polynomial moments of the standard normal
//! over an interval follow from a two-term recurrence.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use super::CovBlock;

/// Half-width of the truncated integration range for outer variables.
const TRUNCATION: f64 = 9.0;

/// Pivots below this fraction of the largest variance are treated as zero.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    /// `1[x > 0]`
    Step,
    /// `max(x, 0)`
    Ramp,
    /// `x`
    Identity,
}

impl Factor {
    #[inline]
    fn eval(self, x: f64) -> f64 {
        match self {
            Factor::Step => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Factor::Ramp => x.max(0.0),
            Factor::Identity => x,
        }
    }

    #[inline]
    fn kinked(self) -> bool {
        !matches!(self, Factor::Identity)
    }
}

struct Plan<'a> {
    factors: &'a [Factor],
    dim: usize,
    /// lower-trapezoidal factor, `chol[j][k]` couples field `j` to variable `k`
    chol: [[f64; 4]; 4],
    /// active variables in integration order
    vars: Vec<usize>,
    /// variable after which field `j` is fully determined
    last_var: [Option<usize>; 4],
    rule: Vec<(f64, f64)>,
}

/// `E[prod_j factors[j](x_j)]` for `x ~ N(0, cov)`.
pub fn gaussian_expectation(cov: &CovBlock, factors: &[Factor], nodes: usize) -> f64 {
    let dim = cov.dim();
    assert_eq!(factors.len(), dim, "one factor per field");

    let scale = (0..dim).map(|a| cov.get(a, a)).fold(0.0, f64::max);
    let mut chol = [[0.0; 4]; 4];
    let mut active = [false; 4];
    for j in 0..dim {
        for k in 0..j {
            if active[k] {
                let s: f64 = (0..k).map(|p| chol[j][p] * chol[k][p]).sum();
                chol[j][k] = (cov.get(j, k) - s) / chol[k][k];
            }
        }
        let s: f64 = (0..j).map(|p| chol[j][p] * chol[j][p]).sum();
        let pivot = cov.get(j, j) - s;
        if pivot > PIVOT_TOL * scale && pivot > 0.0 {
            active[j] = true;
            chol[j][j] = pivot.sqrt();
        }
    }
    let vars: Vec<usize> = (0..dim).filter(|&k| active[k]).collect();
    let mut last_var = [None; 4];
    for (j, lv) in last_var.iter_mut().enumerate().take(dim) {
        *lv = vars.iter().rev().copied().find(|&k| chol[j][k] != 0.0);
    }

    // fields with zero variance are pinned at the origin
    let mut constant = 1.0;
    for j in 0..dim {
        if last_var[j].is_none() {
            constant *= factors[j].eval(0.0);
        }
    }
    if constant == 0.0 || vars.is_empty() {
        return constant;
    }

    let rule = GaussLegendre::new(NonZeroUsize::new(nodes.max(1)).unwrap())
        .as_node_weight_pairs()
        .to_vec();
    let plan = Plan {
        factors,
        dim,
        chol,
        vars,
        last_var,
        rule,
    };
    constant * plan.level(0, [0.0; 4])
}

/// Small fixed-capacity list of breakpoints.
struct Breaks {
    pts: [f64; 24],
    len: usize,
}

impl Breaks {
    fn new() -> Self {
        Self {
            pts: [0.0; 24],
            len: 0,
        }
    }

    fn push(&mut self, t: f64) {
        self.pts[self.len] = t;
        self.len += 1;
    }

    fn sorted(&mut self) -> &[f64] {
        let s = &mut self.pts[..self.len];
        s.sort_by(f64::total_cmp);
        s
    }
}

/// Offsets, in units of the smoothing width, at which a soft kink is split.
const SOFT_KINK_OFFSETS: [f64; 5] = [-3.0, -1.0, 0.0, 1.0, 3.0];

/// Soft kinks wider than this are resolved by the rule without splitting.
const SOFT_KINK_MAX_WIDTH: f64 = 1.0;

impl Plan<'_> {
    fn determined_by(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).filter(move |&j| self.last_var[j] == Some(k))
    }

    /// Whether every kinked factor fixed by `k` is positive at `t`.
    fn piece_alive(&self, k: usize, acc: &[f64; 4], t: f64) -> bool {
        self.determined_by(k)
            .filter(|&j| self.factors[j].kinked())
            .all(|j| acc[j] + self.chol[j][k] * t > 0.0)
    }

    /// Breakpoints in variable `k` at level `li`: exact kinks of factors fixed
    /// by `k`, plus soft kinks of factors that still depend on later variables
    /// and therefore enter as kinks smoothed over a finite width.
    fn breaks(&self, li: usize, acc: &[f64; 4]) -> Breaks {
        let k = self.vars[li];
        let mut out = Breaks::new();
        for j in 0..self.dim {
            let slope = self.chol[j][k];
            if !self.factors[j].kinked() || slope == 0.0 {
                continue;
            }
            let centre = -acc[j] / slope;
            if self.last_var[j] == Some(k) {
                out.push(centre);
                continue;
            }
            let spread: f64 = self.vars[li + 1..]
                .iter()
                .map(|&p| self.chol[j][p] * self.chol[j][p])
                .sum::<f64>()
                .sqrt();
            let width = spread / slope.abs();
            if width < SOFT_KINK_MAX_WIDTH {
                for off in SOFT_KINK_OFFSETS {
                    out.push(centre + off * width);
                }
            }
        }
        out
    }

    fn level(&self, li: usize, acc: [f64; 4]) -> f64 {
        let k = self.vars[li];
        if li + 1 == self.vars.len() {
            return self.innermost(k, &acc);
        }
        let mut breaks = self.breaks(li, &acc);
        let inner = breaks.sorted();

        let mut total = 0.0;
        let mut lo = -TRUNCATION;
        for &hi in inner
            .iter()
            .filter(|t| t.abs() < TRUNCATION)
            .chain(&[TRUNCATION])
        {
            let (a, b) = (lo, hi);
            lo = hi;
            if b - a <= 0.0 || !self.piece_alive(k, &acc, 0.5 * (a + b)) {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for &(x, w) in &self.rule {
                let t = mid + half * x;
                let mut next = acc;
                for j in 0..self.dim {
                    next[j] += self.chol[j][k] * t;
                }
                let mut prod = 1.0;
                for j in self.determined_by(k) {
                    prod *= self.factors[j].eval(next[j]);
                }
                if prod == 0.0 {
                    continue;
                }
                total += w * half * std_normal_pdf(t) * prod * self.level(li + 1, next);
            }
        }
        total
    }

    /// Closed-form integral over the last variable.
    fn innermost(&self, k: usize, acc: &[f64; 4]) -> f64 {
        let mut breaks = Breaks::new();
        for j in self.determined_by(k).filter(|&j| self.factors[j].kinked()) {
            breaks.push(-acc[j] / self.chol[j][k]);
        }
        let kinks = breaks.sorted();

        let mut total = 0.0;
        let mut lo = f64::NEG_INFINITY;
        for &hi in kinks.iter().chain(&[f64::INFINITY]) {
            let (a, b) = (lo, hi);
            lo = hi;
            if !(b > a) {
                continue;
            }
            let probe = match (a.is_finite(), b.is_finite()) {
                (true, true) => 0.5 * (a + b),
                (true, false) => a + 1.0,
                (false, true) => b - 1.0,
                (false, false) => 0.0,
            };
            if !self.piece_alive(k, acc, probe) {
                continue;
            }
            // coefficients of the product polynomial, ascending powers
            let mut poly = [0.0f64; 5];
            poly[0] = 1.0;
            let mut degree = 0;
            for j in self.determined_by(k) {
                if self.factors[j] == Factor::Step {
                    continue;
                }
                let (alpha, beta) = (acc[j], self.chol[j][k]);
                for p in (0..=degree).rev() {
                    poly[p + 1] += beta * poly[p];
                    poly[p] *= alpha;
                }
                degree += 1;
            }
            total += gaussian_poly_integral(&poly[..=degree], a, b);
        }
        total
    }
}

#[inline]
fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `P(a < Z < b)` for a standard normal, accurate in both tails.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * (libm::erfc(-a * FRAC_1_SQRT_2) + libm::erfc(b * FRAC_1_SQRT_2))
    }
}

/// `int_a^b p(t) phi(t) dt` for a polynomial `p` with ascending coefficients.
pub(crate) fn gaussian_poly_integral(poly: &[f64], a: f64, b: f64) -> f64 {
    // t^{n} phi(t) at an endpoint; vanishes at infinity
    let edge = |t: f64, n: i32| {
        if t.is_finite() {
            t.powi(n) * std_normal_pdf(t)
        } else {
            0.0
        }
    };
    let mut moments = [0.0f64; 5];
    moments[0] = normal_interval(a, b);
    if poly.len() > 1 {
        moments[1] = edge(a, 0) - edge(b, 0);
    }
    for n in 2..poly.len() {
        moments[n] =
            (n as f64 - 1.0) * moments[n - 2] + edge(a, n as i32 - 1) - edge(b, n as i32 - 1);
    }
    poly.iter().zip(&moments).map(|(c, m)| c * m).sum()
}
