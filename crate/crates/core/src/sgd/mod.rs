//! Online SGD for the student network.
//!
//! One step on a mini-batch of `b` labelled inputs, with
//! `Delta = phi_student(x) - y` and local fields `lambda_k = w_k . x / sqrt N`:
//!
//! ```text
//! w_k <- w_k - (kappa / N) w_k - eta_w / (b sqrt N) * sum_l v_k g'(lambda_k) Delta x
//! v_k <- v_k - eta_v / (b N) * sum_l g(lambda_k) Delta          (both layers only)
//! ```
//!
//! Both increments use the weights from before the step.

mod balance;
mod input;
mod run;
mod theorem1;

pub use balance::{balance_update, linear_two_layer_step, product_vector};
pub use input::{load_idx, parse_idx_images, InputSource};
pub use run::{run, time_average_final, RunOutcome, SimRecord, SimTrace};
pub use theorem1::{matched_pair, theorem1_deviation, theorem1_target, Theorem1Point};

use crate::activation::ActivationKind;
use crate::config::{Mode, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::network::NetworkParams;

/// A labelled input.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// One SGD step on `batch`, returning the updated student.
pub fn sgd_step(
    student: &NetworkParams,
    batch: &[Sample],
    cfg: &TrainConfig,
) -> Result<NetworkParams> {
    let cfg = cfg.validated()?;
    check_dim("batch size", cfg.batch, batch.len())?;
    check_dim(
        "student hidden units",
        cfg.student_units,
        student.hidden_units(),
    )?;
    check_dim(
        "student input dimension",
        cfg.input_dim,
        student.input_dim(),
    )?;
    for s in batch {
        check_dim("sample", cfg.input_dim, s.x.len())?;
        if !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "sample" });
        }
    }
    let mut stepper = Stepper::new(&cfg, student.clone());
    for s in batch {
        stepper.accumulate(&s.x, s.y);
    }
    stepper.apply();
    Ok(stepper.student)
}

/// In-place SGD state with preallocated buffers.
pub(crate) struct Stepper {
    pub(crate) student: NetworkParams,
    act: ActivationKind,
    coef_w: f64,
    coef_v: f64,
    decay: f64,
    mode: Mode,
    batch: usize,
    fields: Vec<f64>,
    acts: Vec<f64>,
    /// accumulated first-layer increments for mini-batches
    grad_w: Vec<f64>,
    grad_v: Vec<f64>,
    pending: usize,
}

impl Stepper {
    pub(crate) fn new(cfg: &TrainConfig, student: NetworkParams) -> Self {
        let n = cfg.input_dim as f64;
        let k = student.hidden_units();
        let batch = cfg.batch as f64;
        let grad_len = if cfg.batch > 1 { k * cfg.input_dim } else { 0 };
        Self {
            act: cfg.activation,
            coef_w: cfg.eta_w / (batch * n.sqrt()),
            coef_v: cfg.effective_eta_v() / (batch * n),
            decay: 1.0 - cfg.weight_decay / n,
            mode: cfg.mode,
            batch: cfg.batch,
            fields: vec![0.0; k],
            acts: vec![0.0; k],
            grad_w: vec![0.0; grad_len],
            grad_v: vec![0.0; k],
            pending: 0,
            student,
        }
    }

    /// Student output at `x`, leaving fields and activations in the buffers.
    #[inline]
    fn forward_buffered(&mut self, x: &[f64]) -> f64 {
        self.student.local_fields_into(x, &mut self.fields);
        let v = self.student.second_layer();
        let mut out = 0.0;
        for h in 0..self.fields.len() {
            self.acts[h] = self.act.g(self.fields[h]);
            out += v[h] * self.acts[h];
        }
        out
    }

    /// Processes one sample. With `batch == 1` the step is applied at once.
    #[inline]
    pub(crate) fn accumulate(&mut self, x: &[f64], y: f64) {
        let delta = self.forward_buffered(x) - y;
        let k = self.fields.len();
        if self.batch == 1 {
            for h in 0..k {
                let v_h = self.student.second_layer()[h];
                let c = self.coef_w * v_h * self.act.g_prime(self.fields[h]) * delta;
                let decay = self.decay;
                let row = self.student.row_mut(h);
                if decay == 1.0 {
                    axpy(-c, x, row);
                } else {
                    for (w, xi) in row.iter_mut().zip(x) {
                        *w = decay * *w - c * xi;
                    }
                }
            }
            if self.mode == Mode::BothLayers {
                for h in 0..k {
                    self.student.second_layer_mut()[h] -= self.coef_v * self.acts[h] * delta;
                }
            }
            return;
        }
        let n = x.len();
        for h in 0..k {
            let v_h = self.student.second_layer()[h];
            let c = self.coef_w * v_h * self.act.g_prime(self.fields[h]) * delta;
            axpy(-c, x, &mut self.grad_w[h * n..(h + 1) * n]);
            self.grad_v[h] -= self.coef_v * self.acts[h] * delta;
        }
        self.pending += 1;
        if self.pending == self.batch {
            self.apply();
        }
    }

    /// Applies accumulated mini-batch increments.
    pub(crate) fn apply(&mut self) {
        if self.batch == 1 || self.pending == 0 {
            return;
        }
        let k = self.fields.len();
        let n = self.student.input_dim();
        for h in 0..k {
            let decay = self.decay;
            let g = &self.grad_w[h * n..(h + 1) * n];
            for (w, d) in self.student.row_mut(h).iter_mut().zip(g) {
                *w = decay * *w + d;
            }
        }
        if self.mode == Mode::BothLayers {
            for h in 0..k {
                self.student.second_layer_mut()[h] += self.grad_v[h];
            }
        }
        self.grad_w.fill(0.0);
        self.grad_v.fill(0.0);
        self.pending = 0;
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Per-sample loss `(phi_student(x) - y)^2 / 2`.
pub fn sample_loss(student: &NetworkParams, sample: &Sample, act: ActivationKind) -> Result<f64> {
    let d = student.forward(&sample.x, act)? - sample.y;
    Ok(0.5 * d * d)
}

#[cfg(test)]
mod tests;
