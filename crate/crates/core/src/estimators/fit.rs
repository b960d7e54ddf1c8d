use nalgebra::{DMatrix, DVector};

use super::bdksd::BdKsdWorkspace;
use super::optim::{minimize, FitMethod, OptimConfig, OptimOutcome};
use super::tksd::TksdWorkspace;
use super::truncsm::truncsm_value_and_grad;
use crate::error::Result;
use crate::geometry::{approx_distance_rows, exact_distance_l2ball_rows, BoundarySample, LpNorm};
use crate::kernel::KernelConfig;
use crate::models::ScoreModel;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Per-coordinate `|t_l + K' nu_l|` at the estimate (TKSD only).
    pub boundary_residual: Option<DVector<f64>>,
    pub jitter_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: DVector<f64>,
    pub objective_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub method: FitMethod,
    pub converged: bool,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    fn from_outcome(out: OptimOutcome, diagnostics: FitDiagnostics) -> Self {
        Self {
            theta_hat: out.theta,
            objective_value: out.value,
            grad_norm: out.grad_norm,
            iterations: out.iterations,
            method: out.method,
            converged: out.converged,
            diagnostics,
        }
    }
}

/// Source of the boundary weight `h` and its spatial gradient.
#[derive(Debug, Clone)]
pub enum DistanceProvider {
    /// Distance to the sphere of an l2 ball.
    ExactL2Ball { radius: f64, center: Vec<f64> },
    /// Nearest sampled boundary point, `min_j |x - x'_j|_alpha^gamma`.
    Approx {
        boundary: BoundarySample,
        alpha: LpNorm,
        gamma: f64,
    },
}

impl DistanceProvider {
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
        match self {
            DistanceProvider::ExactL2Ball { radius, center } => {
                exact_distance_l2ball_rows(x, *radius, center)
            }
            DistanceProvider::Approx {
                boundary,
                alpha,
                gamma,
            } => approx_distance_rows(x, boundary, *alpha, *gamma),
        }
    }
}

pub fn fit_tksd<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    cfg: &KernelConfig,
    opt: &OptimConfig,
) -> Result<FitResult> {
    let ws = TksdWorkspace::new(x, boundary, cfg)?;
    fit_tksd_workspace(model, &ws, opt)
}

/// Fit against a prebuilt workspace.
pub fn fit_tksd_workspace<M: ScoreModel + ?Sized>(
    model: &M,
    ws: &TksdWorkspace,
    opt: &OptimConfig,
) -> Result<FitResult> {
    let out = minimize(
        |t| ws.value_and_grad(model, t.as_slice()),
        model.dim_theta(),
        model.affine_in_theta(),
        opt,
    )?;
    let diagnostics = FitDiagnostics {
        boundary_residual: Some(ws.boundary_residual(model, out.theta.as_slice())?),
        jitter_used: Some(ws.jitter_used()),
    };
    Ok(FitResult::from_outcome(out, diagnostics))
}

pub fn fit_truncsm<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    distance: &DistanceProvider,
    opt: &OptimConfig,
) -> Result<FitResult> {
    let (h, hg) = distance.evaluate(x)?;
    let out = minimize(
        |t| truncsm_value_and_grad(model, x, &h, &hg, t.as_slice()),
        model.dim_theta(),
        model.affine_in_theta(),
        opt,
    )?;
    Ok(FitResult::from_outcome(out, FitDiagnostics::default()))
}

pub fn fit_bdksd<M: ScoreModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    distance: &DistanceProvider,
    cfg: &KernelConfig,
    opt: &OptimConfig,
) -> Result<FitResult> {
    let (h, hg) = distance.evaluate(x)?;
    let ws = BdKsdWorkspace::new(x, &h, &hg, cfg)?;
    let out = minimize(
        |t| ws.value_and_grad(model, t.as_slice()),
        model.dim_theta(),
        model.affine_in_theta(),
        opt,
    )?;
    Ok(FitResult::from_outcome(out, FitDiagnostics::default()))
}
