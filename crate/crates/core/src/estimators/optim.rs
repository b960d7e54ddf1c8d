use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    /// Starting point; zeros when absent.
    pub theta0: Option<DVector<f64>>,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    pub initial_step: f64,
    /// Stop when `|grad| < grad_tol * (1 + |objective|)`.
    pub grad_tol: f64,
    /// Skip the closed-form solve even for affine-score models.
    pub force_descent: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            theta0: None,
            max_iter: 500,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            grad_tol: 1e-6,
            force_descent: false,
        }
    }
}

impl OptimConfig {
    pub fn with_theta0(mut self, theta0: DVector<f64>) -> Self {
        self.theta0 = Some(theta0);
        self
    }

    pub fn descent_only(mut self) -> Self {
        self.force_descent = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    ExactAffine,
    Descent,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::ExactAffine => "exact-affine",
            FitMethod::Descent => "descent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub theta: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub method: FitMethod,
    pub converged: bool,
}

/// Minimise a smooth objective given as `theta -> (value, gradient)`.
///
/// When `affine_gradient` holds the objective is quadratic: the Hessian is
/// read off from `p + 1` gradient evaluations and the stationary point is
/// solved for directly. A Hessian that is not positive definite falls back
/// to descent.
pub fn minimize<F>(
    mut objective: F,
    dim: usize,
    affine_gradient: bool,
    cfg: &OptimConfig,
) -> Result<OptimOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let theta0 = cfg.theta0.clone().unwrap_or_else(|| DVector::zeros(dim));
    check_dim(dim, theta0.len())?;
    if affine_gradient && !cfg.force_descent {
        if let Some(outcome) = solve_quadratic(&mut objective, &theta0)? {
            return Ok(outcome);
        }
    }
    descend(&mut objective, theta0, cfg)
}

fn solve_quadratic<F>(objective: &mut F, base: &DVector<f64>) -> Result<Option<OptimOutcome>>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let p = base.len();
    let (_, g0) = objective(base)?;
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..p {
        let mut t = base.clone();
        t[i] += 1.0;
        let (_, gi) = objective(&t)?;
        hess.set_column(i, &(gi - &g0));
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    if hess.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let Some(chol) = nalgebra::Cholesky::new(hess) else {
        return Ok(None);
    };
    let theta = base - chol.solve(&g0);
    let (value, grad) = objective(&theta)?;
    if !value.is_finite() {
        return Ok(None);
    }
    Ok(Some(OptimOutcome {
        theta,
        value,
        grad_norm: grad.norm(),
        iterations: 1,
        method: FitMethod::ExactAffine,
        converged: true,
    }))
}

/// Quasi-Newton (BFGS) directions with Armijo backtracking.
fn descend<F>(objective: &mut F, theta0: DVector<f64>, cfg: &OptimConfig) -> Result<OptimOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let p = theta0.len();
    let mut theta = theta0;
    let (mut f, mut g) = objective(&theta)?;
    let mut inv_hess = DMatrix::<f64>::identity(p, p);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        if g.norm() < cfg.grad_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let mut dir = -(&inv_hess * &g);
        let mut slope = g.dot(&dir);
        if slope.is_nan() || slope >= 0.0 {
            inv_hess.fill_with_identity();
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut step = cfg.initial_step;
        let accepted = loop {
            let cand = &theta + &dir * step;
            let (fc, gc) = objective(&cand)?;
            if fc.is_finite() && fc <= f + cfg.armijo_c * step * slope {
                break Some((cand, fc, gc));
            }
            step *= cfg.shrink;
            if step * dir.norm() <= f64::EPSILON * (1.0 + theta.norm()) {
                break None;
            }
        };
        iterations += 1;
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        let s = &cand - &theta;
        let y = &gc - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if iterations == 1 {
                inv_hess *= sy / y.norm_squared();
            }
            let rho = 1.0 / sy;
            let hy = &inv_hess * &y;
            let yhy = y.dot(&hy);
            inv_hess += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        theta = cand;
        f = fc;
        g = gc;
    }
    if !converged && g.norm() < cfg.grad_tol * (1.0 + f.abs()) {
        converged = true;
    }
    Ok(OptimOutcome {
        grad_norm: g.norm(),
        theta,
        value: f,
        iterations,
        method: FitMethod::Descent,
        converged,
    })
}
