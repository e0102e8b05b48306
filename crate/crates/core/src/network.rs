use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationKind;
use crate::error::{check_dim, Error, Result};

/// Weights of a two-layer network `phi(x) = sum_h v_h g(w_h . x / sqrt N)`.
///
/// The first layer is stored row-major so that each hidden unit's weight
/// vector is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    hidden_units: usize,
    input_dim: usize,
    first_layer: Vec<f64>,
    second_layer: Vec<f64>,
}

impl NetworkParams {
    pub fn new(
        hidden_units: usize,
        input_dim: usize,
        first_layer: Vec<f64>,
        second_layer: Vec<f64>,
    ) -> Result<Self> {
        if hidden_units == 0 || input_dim == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one hidden unit and one input".into(),
            ));
        }
        check_dim("first layer", hidden_units * input_dim, first_layer.len())?;
        check_dim("second layer", hidden_units, second_layer.len())?;
        let params = Self {
            hidden_units,
            input_dim,
            first_layer,
            second_layer,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite {
                context: "network weights",
            });
        }
        Ok(params)
    }

    pub fn from_rows(rows: &[Vec<f64>], second_layer: Vec<f64>) -> Result<Self> {
        let input_dim = rows.first().map_or(0, Vec::len);
        let mut first = Vec::with_capacity(rows.len() * input_dim);
        for row in rows {
            check_dim("weight row", input_dim, row.len())?;
            first.extend_from_slice(row);
        }
        Self::new(rows.len(), input_dim, first, second_layer)
    }

    /// First-layer entries i.i.d. `N(0, weight_std^2)`.
    pub fn gaussian<R: Rng + ?Sized>(
        hidden_units: usize,
        input_dim: usize,
        weight_std: f64,
        second_layer: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let first = (0..hidden_units * input_dim)
            .map(|_| weight_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(hidden_units, input_dim, first, second_layer)
    }

    #[inline]
    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    #[inline]
    pub fn row(&self, h: usize) -> &[f64] {
        &self.first_layer[h * self.input_dim..(h + 1) * self.input_dim]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.first_layer[h * self.input_dim..(h + 1) * self.input_dim]
    }

    pub fn first_layer(&self) -> &[f64] {
        &self.first_layer
    }

    pub fn second_layer(&self) -> &[f64] {
        &self.second_layer
    }

    pub(crate) fn second_layer_mut(&mut self) -> &mut [f64] {
        &mut self.second_layer
    }

    pub fn is_finite(&self) -> bool {
        self.first_layer
            .iter()
            .chain(&self.second_layer)
            .all(|x| x.is_finite())
    }

    /// Local fields `w_h . x / sqrt N` written into `out`.
    #[inline]
    pub(crate) fn local_fields_into(&self, x: &[f64], out: &mut [f64]) {
        let scale = 1.0 / (self.input_dim as f64).sqrt();
        for (h, o) in out.iter_mut().enumerate().take(self.hidden_units) {
            *o = dot(self.row(h), x) * scale;
        }
    }

    pub fn local_fields(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("input", self.input_dim, x.len())?;
        let mut out = vec![0.0; self.hidden_units];
        self.local_fields_into(x, &mut out);
        Ok(out)
    }

    /// Network output without label noise.
    pub fn forward(&self, x: &[f64], activation: ActivationKind) -> Result<f64> {
        check_dim("input", self.input_dim, x.len())?;
        Ok(self.forward_unchecked(x, activation))
    }

    #[inline]
    pub(crate) fn forward_unchecked(&self, x: &[f64], activation: ActivationKind) -> f64 {
        let scale = 1.0 / (self.input_dim as f64).sqrt();
        (0..self.hidden_units)
            .map(|h| self.second_layer[h] * activation.g(dot(self.row(h), x) * scale))
            .sum()
    }

    /// The network `(a v, w / a)`, which has the same output for linear activation.
    pub fn rescaled(&self, a: f64) -> Result<Self> {
        Self::new(
            self.hidden_units,
            self.input_dim,
            self.first_layer.iter().map(|w| w / a).collect(),
            self.second_layer.iter().map(|v| v * a).collect(),
        )
    }

    /// Effective linear map `u_j = sum_m v_m w_mj` of a linear two-layer network.
    pub fn product_vector(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.input_dim];
        for h in 0..self.hidden_units {
            let v = self.second_layer[h];
            for (uj, wj) in u.iter_mut().zip(self.row(h)) {
                *uj += v * wj;
            }
        }
        u
    }

    /// Same network with hidden units reordered: unit `h` of the result is unit `perm[h]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_dim("permutation", self.hidden_units, perm.len())?;
        let mut first = Vec::with_capacity(self.first_layer.len());
        let mut second = Vec::with_capacity(self.hidden_units);
        for &p in perm {
            if p >= self.hidden_units {
                return Err(Error::InvalidArgument(format!(
                    "permutation index {p} out of range"
                )));
            }
            first.extend_from_slice(self.row(p));
            second.push(self.second_layer[p]);
        }
        Self::new(self.hidden_units, self.input_dim, first, second)
    }
}

/// Dot product with four independent accumulators; fixed summation order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
