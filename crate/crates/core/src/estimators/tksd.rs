//! The truncated KSD statistic, its gradient and boundary diagnostics.
//!
//! With `M = (K' + eps I)^{-1}` and `v_l(z)_j = psi_l(z) k(z, x'_j) + d/dz_l k(z, x'_j)`,
//! the pair kernel is
//!
//! ```text
//! h(x, y) = sum_l u_l(x, y) - v_l(x)^T M v_l(y)
//! ```
//!
//! Everything that does not depend on `theta` (the Gram matrices, the
//! factorisation of `K'`, and the kernel-derivative reductions) lives in
//! [`TksdWorkspace`] so an optimiser only pays `O(d (n^2 + n m + m^2))` per
//! evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result, TksdError};
use crate::geometry::BoundarySample;
use crate::kernel::{grad_gram, gram, kernel_bundle, KernelBundle, KernelConfig, SpdSolver};
use crate::models::{jacobian_rows, score_rows, ScoreModel};

/// One coordinate of the KSD pair kernel.
pub fn u_l_term(psi_x_l: f64, psi_y_l: f64, bundle: &KernelBundle, l: usize) -> f64 {
    psi_x_l * psi_y_l * bundle.k
        + psi_x_l * bundle.dky[l]
        + psi_y_l * bundle.dkx[l]
        + bundle.dkxy[l]
}

/// `v_l(z)` against every boundary point, computed pointwise.
pub fn v_l(
    z: &[f64],
    psi_z_l: f64,
    l: usize,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
) -> Result<DVector<f64>> {
    check_dim(boundary.dim(), z.len())?;
    let mut out = DVector::zeros(boundary.len());
    for j in 0..boundary.len() {
        let b = kernel_bundle(z, &boundary.point(j), cfg)?;
        out[j] = psi_z_l * b.k + b.dkx[l];
    }
    Ok(out)
}

/// Plain (untruncated) KSD V-statistic, summed pair by pair.
pub fn ksd_vstat<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    cfg: &KernelConfig,
    theta: &[f64],
) -> Result<f64> {
    let n = x.nrows();
    if n == 0 {
        return Err(TksdError::InvalidInput("no data".into()));
    }
    let psi = score_rows(model, theta, x)?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let b = kernel_bundle(&rows[i], &rows[j], cfg)?;
            for l in 0..x.ncols() {
                total += u_l_term(psi[(i, l)], psi[(j, l)], &b, l);
            }
        }
    }
    Ok(total / (n * n) as f64)
}

/// `theta`-independent quantities for one dataset and boundary sample.
#[derive(Debug, Clone)]
pub struct TksdWorkspace {
    data: DMatrix<f64>,
    boundary: DMatrix<f64>,
    cfg: KernelConfig,
    kxx: DMatrix<f64>,
    /// `c[(i, l)] = sum_j d/dy_l k(x_i, x_j)`
    dky_rowsum: DMatrix<f64>,
    /// `sum_ij d/dx_l d/dy_l k(x_i, x_j)` per coordinate
    dkxy_total: DVector<f64>,
    kp: DMatrix<f64>,
    solver: SpdSolver,
    phi: DMatrix<f64>,
    dphi: Vec<DMatrix<f64>>,
    /// `sum_i d/dx_l k(x_i, x'_j)` as an `m x d` matrix
    dphi_colsum: DMatrix<f64>,
}

impl TksdWorkspace {
    pub fn new(x: &DMatrix<f64>, boundary: &BoundarySample, cfg: &KernelConfig) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 {
            return Err(TksdError::InvalidInput("no data".into()));
        }
        check_dim(d, boundary.dim())?;
        let xb = boundary.points();
        let s2 = cfg.bandwidth * cfg.bandwidth;

        let kxx = gram(x, x, cfg)?;
        let mut dky_rowsum = DMatrix::zeros(n, d);
        let mut dkxy_total = DVector::zeros(d);
        for i in 0..n {
            for j in 0..n {
                let k = kxx[(i, j)];
                for l in 0..d {
                    let diff = x[(i, l)] - x[(j, l)];
                    dky_rowsum[(i, l)] += diff / s2 * k;
                    dkxy_total[l] += k * (1.0 / s2 - diff * diff / (s2 * s2));
                }
            }
        }

        let kp = gram(xb, xb, cfg)?;
        let solver = SpdSolver::factor(&kp, cfg)?;
        let phi = gram(x, xb, cfg)?;
        let dphi = (0..d)
            .map(|l| grad_gram(x, xb, l, cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut dphi_colsum = DMatrix::zeros(xb.nrows(), d);
        for (l, g) in dphi.iter().enumerate() {
            dphi_colsum.set_column(l, &g.row_sum().transpose());
        }

        Ok(Self {
            data: x.clone(),
            boundary: xb.clone(),
            cfg: *cfg,
            kxx,
            dky_rowsum,
            dkxy_total,
            kp,
            solver,
            phi,
            dphi,
            dphi_colsum,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.boundary.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    /// Boundary Gram `K'`.
    pub fn kp(&self) -> &DMatrix<f64> {
        &self.kp
    }

    pub fn kxx(&self) -> &DMatrix<f64> {
        &self.kxx
    }

    /// Cross Gram `[k(x_i, x'_j)]`.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// `[d/d(x_i)_l k(x_i, x'_j)]`.
    pub fn dphi(&self, l: usize) -> &DMatrix<f64> {
        &self.dphi[l]
    }

    pub fn jitter_used(&self) -> f64 {
        self.solver.jitter_used()
    }

    /// Rows `v_l(x_i)^T`, an `n x m` matrix.
    pub fn v_rows(&self, psi: &DMatrix<f64>, l: usize) -> DMatrix<f64> {
        let mut v = self.dphi[l].clone();
        for i in 0..self.n() {
            let s = psi[(i, l)];
            for j in 0..self.m() {
                v[(i, j)] += s * self.phi[(i, j)];
            }
        }
        v
    }

    /// `sum_i v_l(x_i)`.
    fn v_sum(&self, psi: &DMatrix<f64>, l: usize) -> DVector<f64> {
        self.phi.tr_mul(&psi.column(l)) + self.dphi_colsum.column(l)
    }

    fn check_scores(&self, psi: &DMatrix<f64>) -> Result<()> {
        check_dim(self.n(), psi.nrows())?;
        check_dim(self.dim(), psi.ncols())
    }

    /// V-statistic from precomputed scores.
    pub fn vstat_from_scores(&self, psi: &DMatrix<f64>) -> Result<f64> {
        self.check_scores(psi)?;
        let n = self.n() as f64;
        let mut total = 0.0;
        for l in 0..self.dim() {
            let p = psi.column(l);
            let kp = &self.kxx * p;
            let ksd = p.dot(&kp) + 2.0 * p.dot(&self.dky_rowsum.column(l)) + self.dkxy_total[l];
            let s = self.v_sum(psi, l);
            let trunc = s.dot(&self.solver.solve_vec(&s));
            total += ksd - trunc;
        }
        Ok(total / (n * n))
    }

    pub fn vstat<M: ScoreModel + ?Sized>(&self, model: &M, theta: &[f64]) -> Result<f64> {
        self.vstat_from_scores(&score_rows(model, theta, &self.data)?)
    }

    /// V-statistic and its `theta`-gradient.
    pub fn value_and_grad<M: ScoreModel + ?Sized>(
        &self,
        model: &M,
        theta: &[f64],
    ) -> Result<(f64, DVector<f64>)> {
        let psi = score_rows(model, theta, &self.data)?;
        let jac = jacobian_rows(model, theta, &self.data)?;
        let n = self.n() as f64;
        let mut value = 0.0;
        let mut grad = DVector::zeros(model.dim_theta());
        for (l, jl) in jac.iter().enumerate() {
            let p = psi.column(l);
            let c = self.dky_rowsum.column(l);
            let kp = &self.kxx * p;
            value += p.dot(&kp) + 2.0 * p.dot(&c) + self.dkxy_total[l];
            let s = self.v_sum(&psi, l);
            let w = self.solver.solve_vec(&s);
            value -= s.dot(&w);
            let resid = kp + c - &self.phi * w;
            grad += jl.tr_mul(&resid);
        }
        Ok((value / (n * n), grad * (2.0 / (n * n))))
    }

    pub fn grad<M: ScoreModel + ?Sized>(&self, model: &M, theta: &[f64]) -> Result<DVector<f64>> {
        Ok(self.value_and_grad(model, theta)?.1)
    }

    /// Full `n x n` matrix of pair-kernel values `h(x_i, x_j)`.
    pub fn pair_kernel<M: ScoreModel + ?Sized>(
        &self,
        model: &M,
        theta: &[f64],
    ) -> Result<DMatrix<f64>> {
        let psi = score_rows(model, theta, &self.data)?;
        let (n, d) = self.data.shape();
        let s2 = self.cfg.bandwidth * self.cfg.bandwidth;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let k = self.kxx[(i, j)];
                let mut acc = 0.0;
                for l in 0..d {
                    let diff = self.data[(i, l)] - self.data[(j, l)];
                    let dkx = -diff / s2 * k;
                    let dkxy = k * (1.0 / s2 - diff * diff / (s2 * s2));
                    acc += psi[(i, l)] * psi[(j, l)] * k - psi[(i, l)] * dkx
                        + psi[(j, l)] * dkx
                        + dkxy;
                }
                h[(i, j)] = acc;
            }
        }
        for l in 0..d {
            let v = self.v_rows(&psi, l);
            let a = self.solver.solve(&v.transpose());
            h -= &v * a;
        }
        Ok(h)
    }

    /// Unbiased form: mean of `h` over ordered pairs `i != j`.
    pub fn ustat<M: ScoreModel + ?Sized>(&self, model: &M, theta: &[f64]) -> Result<f64> {
        let n = self.n();
        if n < 2 {
            return Err(TksdError::InvalidInput(format!(
                "U-statistic needs at least 2 points, got {n}"
            )));
        }
        let h = self.pair_kernel(model, theta)?;
        let off_diag = h.sum() - h.trace();
        Ok(off_diag / (n * (n - 1)) as f64)
    }

    /// `t_l = (1/n) sum_i v_l(x_i)` and `nu_l = -(K' + eps I)^{-1} t_l`.
    fn dual(&self, psi: &DMatrix<f64>, l: usize) -> (DVector<f64>, DVector<f64>) {
        let t = self.v_sum(psi, l) / self.n() as f64;
        let nu = -self.solver.solve_vec(&t);
        (t, nu)
    }

    /// `|t_l + K' nu_l|` per coordinate; zero when the boundary constraint
    /// is met exactly.
    pub fn boundary_residual<M: ScoreModel + ?Sized>(
        &self,
        model: &M,
        theta: &[f64],
    ) -> Result<DVector<f64>> {
        let psi = score_rows(model, theta, &self.data)?;
        Ok(DVector::from_fn(self.dim(), |l, _| {
            let (t, nu) = self.dual(&psi, l);
            (t + &self.kp * nu).norm()
        }))
    }

    /// Unnormalised optimal witness `g_l(z)` at each query row. With
    /// `constrained = false` the boundary multipliers are dropped and the
    /// plain KSD witness is returned.
    pub fn reconstruct_g<M: ScoreModel + ?Sized>(
        &self,
        model: &M,
        theta: &[f64],
        query: &DMatrix<f64>,
        constrained: bool,
    ) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), query.ncols())?;
        let psi = score_rows(model, theta, &self.data)?;
        let n = self.n() as f64;
        let kzx = gram(&self.data, query, &self.cfg)?;
        let phi_z = gram(query, &self.boundary, &self.cfg)?;
        let mut out = DMatrix::zeros(query.nrows(), self.dim());
        for l in 0..self.dim() {
            let dk = grad_gram(&self.data, query, l, &self.cfg)?;
            let mut col = (kzx.tr_mul(&psi.column(l)) + dk.row_sum().transpose()) / n;
            if constrained {
                let (_, nu) = self.dual(&psi, l);
                col += &phi_z * nu;
            }
            out.set_column(l, &(-col));
        }
        Ok(out)
    }
}

pub fn tksd_vstat<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
    theta: &[f64],
) -> Result<f64> {
    TksdWorkspace::new(x, boundary, cfg)?.vstat(model, theta)
}

pub fn tksd_ustat<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
    theta: &[f64],
) -> Result<f64> {
    TksdWorkspace::new(x, boundary, cfg)?.ustat(model, theta)
}

pub fn tksd_grad<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
    theta: &[f64],
) -> Result<DVector<f64>> {
    TksdWorkspace::new(x, boundary, cfg)?.grad(model, theta)
}

pub fn boundary_residual<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
    theta: &[f64],
) -> Result<DVector<f64>> {
    TksdWorkspace::new(x, boundary, cfg)?.boundary_residual(model, theta)
}

pub fn reconstruct_g<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
    theta: &[f64],
    query: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    TksdWorkspace::new(x, boundary, cfg)?.reconstruct_g(model, theta, query, true)
}
