//! Score matching weighted by a distance-to-boundary function `h`, shared by
//! every coordinate.
//!
//! Integrating `E[h |psi_p - psi_q|^2]` by parts leaves
//! `E[sum_l h (psi_l^2 + 2 d_l psi_l) + 2 d_l h psi_l]` up to a constant.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result, TksdError};
use crate::models::{
    divergence_jacobian_rows, divergence_rows, jacobian_rows, score_rows, ScoreModel,
};

pub(crate) fn check_weights(x: &DMatrix<f64>, h: &[f64], h_grads: &DMatrix<f64>) -> Result<()> {
    check_dim(x.nrows(), h.len())?;
    check_dim(x.nrows(), h_grads.nrows())?;
    check_dim(x.ncols(), h_grads.ncols())?;
    if let Some(i) = h.iter().position(|v| v.is_nan() || *v < 0.0) {
        return Err(TksdError::InvalidInput(format!(
            "weight h must be non-negative, got {} at row {i}",
            h[i]
        )));
    }
    Ok(())
}

/// `(1/n) sum_i sum_l [h (psi_l^2 + 2 d_l psi_l) + 2 d_l h psi_l]`.
pub fn truncsm_objective<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    h: &[f64],
    h_grads: &DMatrix<f64>,
    theta: &[f64],
) -> Result<f64> {
    check_weights(x, h, h_grads)?;
    let psi = score_rows(model, theta, x)?;
    let div = divergence_rows(model, theta, x)?;
    let mut total = 0.0;
    for i in 0..x.nrows() {
        for l in 0..x.ncols() {
            let p = psi[(i, l)];
            total += h[i] * (p * p + 2.0 * div[(i, l)]) + 2.0 * h_grads[(i, l)] * p;
        }
    }
    Ok(total / x.nrows() as f64)
}

pub fn truncsm_value_and_grad<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    h: &[f64],
    h_grads: &DMatrix<f64>,
    theta: &[f64],
) -> Result<(f64, DVector<f64>)> {
    check_weights(x, h, h_grads)?;
    let psi = score_rows(model, theta, x)?;
    let div = divergence_rows(model, theta, x)?;
    let jac = jacobian_rows(model, theta, x)?;
    let djac = divergence_jacobian_rows(model, theta, x)?;
    let (n, d) = x.shape();
    let mut value = 0.0;
    let mut grad = DVector::zeros(model.dim_theta());
    for l in 0..d {
        let mut wj = DVector::zeros(n);
        let mut wd = DVector::zeros(n);
        for i in 0..n {
            let p = psi[(i, l)];
            value += h[i] * (p * p + 2.0 * div[(i, l)]) + 2.0 * h_grads[(i, l)] * p;
            wj[i] = 2.0 * (h[i] * p + h_grads[(i, l)]);
            wd[i] = 2.0 * h[i];
        }
        grad += jac[l].tr_mul(&wj) + djac[l].tr_mul(&wd);
    }
    let n = n as f64;
    Ok((value / n, grad / n))
}
