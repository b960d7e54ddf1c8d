//! KSD with the boundary-weighted Stein operator `T g = sum_l psi_l h g_l + d_l (h g_l)`.
//!
//! Writing `A_l = psi_l h + d_l h`, the V-statistic expands to
//! `(1/n^2) sum_l [A_l^T K A_l + 2 A_l^T b_l + e_l]` with
//! `b_l[i] = sum_j h_j d/dy_l k(x_i, x_j)` and `e_l = sum_ij h_i h_j d2k/dx_l dy_l`.

use nalgebra::{DMatrix, DVector};

use super::truncsm::check_weights;
use crate::error::Result;
use crate::kernel::{gram, KernelConfig};
use crate::models::{jacobian_rows, score_rows, ScoreModel};

#[derive(Debug, Clone)]
pub struct BdKsdWorkspace {
    data: DMatrix<f64>,
    h: DVector<f64>,
    h_grads: DMatrix<f64>,
    kxx: DMatrix<f64>,
    b: DMatrix<f64>,
    e: DVector<f64>,
}

impl BdKsdWorkspace {
    pub fn new(
        x: &DMatrix<f64>,
        h: &[f64],
        h_grads: &DMatrix<f64>,
        cfg: &KernelConfig,
    ) -> Result<Self> {
        check_weights(x, h, h_grads)?;
        let (n, d) = x.shape();
        let s2 = cfg.bandwidth * cfg.bandwidth;
        let kxx = gram(x, x, cfg)?;
        let mut b = DMatrix::zeros(n, d);
        let mut e = DVector::zeros(d);
        for i in 0..n {
            for j in 0..n {
                let k = kxx[(i, j)];
                for l in 0..d {
                    let diff = x[(i, l)] - x[(j, l)];
                    b[(i, l)] += h[j] * diff / s2 * k;
                    e[l] += h[i] * h[j] * k * (1.0 / s2 - diff * diff / (s2 * s2));
                }
            }
        }
        Ok(Self {
            data: x.clone(),
            h: DVector::from_column_slice(h),
            h_grads: h_grads.clone(),
            kxx,
            b,
            e,
        })
    }

    fn a_column(&self, psi: &DMatrix<f64>, l: usize) -> DVector<f64> {
        psi.column(l).component_mul(&self.h) + self.h_grads.column(l)
    }

    pub fn vstat<M: ScoreModel + ?Sized>(&self, model: &M, theta: &[f64]) -> Result<f64> {
        let psi = score_rows(model, theta, &self.data)?;
        let n = self.data.nrows() as f64;
        let mut total = 0.0;
        for l in 0..self.data.ncols() {
            let a = self.a_column(&psi, l);
            total += a.dot(&(&self.kxx * &a)) + 2.0 * a.dot(&self.b.column(l)) + self.e[l];
        }
        Ok(total / (n * n))
    }

    pub fn value_and_grad<M: ScoreModel + ?Sized>(
        &self,
        model: &M,
        theta: &[f64],
    ) -> Result<(f64, DVector<f64>)> {
        let psi = score_rows(model, theta, &self.data)?;
        let jac = jacobian_rows(model, theta, &self.data)?;
        let n = self.data.nrows() as f64;
        let mut value = 0.0;
        let mut grad = DVector::zeros(model.dim_theta());
        for (l, jl) in jac.iter().enumerate() {
            let a = self.a_column(&psi, l);
            let ka = &self.kxx * &a;
            value += a.dot(&ka) + 2.0 * a.dot(&self.b.column(l)) + self.e[l];
            let w = (ka + self.b.column(l)).component_mul(&self.h);
            grad += jl.tr_mul(&w);
        }
        Ok((value / (n * n), grad * (2.0 / (n * n))))
    }
}

pub fn bdksd_vstat<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    h: &[f64],
    h_grads: &DMatrix<f64>,
    cfg: &KernelConfig,
    theta: &[f64],
) -> Result<f64> {
    BdKsdWorkspace::new(x, h, h_grads, cfg)?.vstat(model, theta)
}
