//! Product-vector dynamics of an unnormalised two-layer linear network
//! `phi(x) = sum_m v_m (w_m . x)` with plain SGD on `(y - phi)^2 / 2`.
//!
//! Rescaling `(v, w) -> (a v, w / a)` leaves `u = sum_m v_m w_m` and the output
//! unchanged, but the first-order change of `u` is
//! `eta e (|v|^2 x + w^T w x)`, so an imbalance between the layers acts as a
//! different learning rate.

use super::Sample;
use crate::error::{check_dim, Result};
use crate::network::{dot, NetworkParams};

/// First-order change of the product vector after one SGD step on `sample`.
///
/// `w` supplies the first layer (its second layer is ignored); `v` is the
/// second layer.
pub fn balance_update(v: &[f64], w: &NetworkParams, sample: &Sample, eta: f64) -> Result<Vec<f64>> {
    check_dim("second layer", w.hidden_units(), v.len())?;
    check_dim("sample", w.input_dim(), sample.x.len())?;
    let x = &sample.x;
    let u = product(v, w);
    let err = sample.y - dot(&u, x);
    let v_norm_sq = dot(v, v);
    let mut out: Vec<f64> = x.iter().map(|xi| v_norm_sq * xi).collect();
    for m in 0..w.hidden_units() {
        let proj = dot(w.row(m), x);
        for (o, wj) in out.iter_mut().zip(w.row(m)) {
            *o += proj * wj;
        }
    }
    for o in out.iter_mut() {
        *o *= eta * err;
    }
    Ok(out)
}

/// One exact SGD step of the unnormalised linear network; returns `(v, w)`.
pub fn linear_two_layer_step(
    v: &[f64],
    w: &NetworkParams,
    sample: &Sample,
    eta: f64,
) -> Result<(Vec<f64>, NetworkParams)> {
    check_dim("second layer", w.hidden_units(), v.len())?;
    check_dim("sample", w.input_dim(), sample.x.len())?;
    let x = &sample.x;
    let err = sample.y - dot(&product(v, w), x);
    let new_v: Vec<f64> = (0..v.len())
        .map(|m| v[m] + eta * err * dot(w.row(m), x))
        .collect();
    let rows: Vec<Vec<f64>> = (0..v.len())
        .map(|m| {
            w.row(m)
                .iter()
                .zip(x)
                .map(|(wj, xj)| wj + eta * err * v[m] * xj)
                .collect()
        })
        .collect();
    Ok((
        new_v,
        NetworkParams::from_rows(&rows, w.second_layer().to_vec())?,
    ))
}

fn product(v: &[f64], w: &NetworkParams) -> Vec<f64> {
    let mut u = vec![0.0; w.input_dim()];
    for (m, vm) in v.iter().enumerate() {
        for (uj, wj) in u.iter_mut().zip(w.row(m)) {
            *uj += vm * wj;
        }
    }
    u
}

/// Product vector `u = sum_m v_m w_m`.
pub fn product_vector(v: &[f64], w: &NetworkParams) -> Result<Vec<f64>> {
    check_dim("second layer", w.hidden_units(), v.len())?;
    Ok(product(v, w))
}
