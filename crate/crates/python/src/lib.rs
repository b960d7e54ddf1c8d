//! Python bindings. Points are passed as lists of rows.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tksd::estimators::{self, DistanceProvider, FitResult, OptimConfig};
use tksd::geometry::{self, BoundarySample, Domain, GaussianSampler, LpBall, LpNorm};
use tksd::harness::{self, ExperimentConfig};
use tksd::kernel::{self, KernelConfig};
use tksd::models::{
    self, GaussianMeanModel, GaussianMixtureMeansModel, ScoreModel, TruncatedRegressionModel,
};
use tksd::TksdError;

fn to_py(e: TksdError) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn boundary(points: &[Vec<f64>]) -> PyResult<BoundarySample> {
    BoundarySample::new(matrix(points)?, None).map_err(to_py)
}

fn kernel_for(x: &DMatrix<f64>, bandwidth: Option<f64>) -> PyResult<KernelConfig> {
    match bandwidth {
        Some(bw) => KernelConfig::new(bw),
        None => KernelConfig::from_data(x),
    }
    .map_err(to_py)
}

fn norm(order: u32) -> PyResult<LpNorm> {
    LpNorm::from_order(order).map_err(to_py)
}

fn optim(theta0: Option<Vec<f64>>) -> OptimConfig {
    match theta0 {
        Some(t) => OptimConfig::default().with_theta0(DVector::from_vec(t)),
        None => OptimConfig::default(),
    }
}

fn fit_dict<'py>(py: Python<'py>, fit: &FitResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("theta_hat", fit.theta_hat.as_slice().to_vec())?;
    d.set_item("objective_value", fit.objective_value)?;
    d.set_item("grad_norm", fit.grad_norm)?;
    d.set_item("iterations", fit.iterations)?;
    d.set_item("method", fit.method.as_str())?;
    d.set_item("converged", fit.converged)?;
    d.set_item(
        "boundary_residual",
        fit.diagnostics
            .boundary_residual
            .as_ref()
            .map(|r| r.as_slice().to_vec()),
    )?;
    d.set_item("jitter_used", fit.diagnostics.jitter_used)?;
    Ok(d)
}

/// A score model with its parameter passed separately on each call.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: Arc<dyn ScoreModel>,
    label: &'static str,
}

#[pymethods]
impl PyModel {
    /// Gaussian with unknown mean. Pass either `covariance` or `dim` (and an
    /// optional isotropic `scale`).
    #[staticmethod]
    #[pyo3(signature = (dim=None, scale=1.0, covariance=None))]
    fn gaussian(
        dim: Option<usize>,
        scale: f64,
        covariance: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let model = match (covariance, dim) {
            (Some(c), _) => GaussianMeanModel::new(matrix(&c)?),
            (None, Some(d)) => GaussianMeanModel::isotropic(d, scale),
            (None, None) => return Err(PyValueError::new_err("give dim or covariance")),
        }
        .map_err(to_py)?;
        Ok(Self {
            inner: Arc::new(model),
            label: "gaussian",
        })
    }

    /// Equal-weight mixture of unit-covariance Gaussians with unknown means.
    #[staticmethod]
    fn mixture(components: usize, dim: usize) -> PyResult<Self> {
        let model = GaussianMixtureMeansModel::new(components, dim).map_err(to_py)?;
        Ok(Self {
            inner: Arc::new(model),
            label: "mixture",
        })
    }

    /// `y_i ~ N(b0 + b1 c_i, 1)`; row `i` of the data is scored against `c_i`.
    #[staticmethod]
    fn regression(covariates: Vec<f64>) -> PyResult<Self> {
        let model = TruncatedRegressionModel::new(covariates).map_err(to_py)?;
        Ok(Self {
            inner: Arc::new(model),
            label: "regression",
        })
    }

    #[getter]
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    #[getter]
    fn dim_theta(&self) -> usize {
        self.inner.dim_theta()
    }

    /// Score at every row of `x`.
    fn score(&self, theta: Vec<f64>, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let s = models::score_rows(self.inner.as_ref(), &theta, &matrix(&x)?).map_err(to_py)?;
        Ok(rows(&s))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model.{}(dim_x={}, dim_theta={})",
            self.label,
            self.inner.dim_x(),
            self.inner.dim_theta()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, theta, bandwidth=None))]
fn tksd_vstat(
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    theta: Vec<f64>,
    bandwidth: Option<f64>,
) -> PyResult<f64> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    estimators::tksd_vstat(
        model.inner.as_ref(),
        &x,
        &boundary(&boundary_points)?,
        &cfg,
        &theta,
    )
    .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, theta, bandwidth=None))]
fn tksd_ustat(
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    theta: Vec<f64>,
    bandwidth: Option<f64>,
) -> PyResult<f64> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    estimators::tksd_ustat(
        model.inner.as_ref(),
        &x,
        &boundary(&boundary_points)?,
        &cfg,
        &theta,
    )
    .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, theta, bandwidth=None))]
fn tksd_grad(
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    theta: Vec<f64>,
    bandwidth: Option<f64>,
) -> PyResult<Vec<f64>> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    let g = estimators::tksd_grad(
        model.inner.as_ref(),
        &x,
        &boundary(&boundary_points)?,
        &cfg,
        &theta,
    )
    .map_err(to_py)?;
    Ok(g.as_slice().to_vec())
}

/// Untruncated kernel Stein discrepancy (V-statistic).
#[pyfunction]
#[pyo3(signature = (model, x, theta, bandwidth=None))]
fn ksd_vstat(
    model: &PyModel,
    x: Vec<Vec<f64>>,
    theta: Vec<f64>,
    bandwidth: Option<f64>,
) -> PyResult<f64> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    estimators::ksd_vstat(model.inner.as_ref(), &x, &cfg, &theta).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, theta, bandwidth=None))]
fn boundary_residual(
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    theta: Vec<f64>,
    bandwidth: Option<f64>,
) -> PyResult<Vec<f64>> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    let r = estimators::boundary_residual(
        model.inner.as_ref(),
        &x,
        &boundary(&boundary_points)?,
        &cfg,
        &theta,
    )
    .map_err(to_py)?;
    Ok(r.as_slice().to_vec())
}

/// Optimal Stein witness evaluated at `query`.
#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, theta, query, bandwidth=None))]
fn reconstruct_g(
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    theta: Vec<f64>,
    query: Vec<Vec<f64>>,
    bandwidth: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    let g = estimators::reconstruct_g(
        model.inner.as_ref(),
        &x,
        &boundary(&boundary_points)?,
        &cfg,
        &theta,
        &matrix(&query)?,
    )
    .map_err(to_py)?;
    Ok(rows(&g))
}

#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, bandwidth=None, theta0=None))]
fn fit_tksd<'py>(
    py: Python<'py>,
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    bandwidth: Option<f64>,
    theta0: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    let b = boundary(&boundary_points)?;
    let fit = py
        .detach(|| estimators::fit_tksd(model.inner.as_ref(), &x, &b, &cfg, &optim(theta0)))
        .map_err(to_py)?;
    fit_dict(py, &fit)
}

fn distance(
    radius: Option<f64>,
    boundary_points: Option<Vec<Vec<f64>>>,
    alpha: u32,
    gamma: f64,
    dim: usize,
) -> PyResult<DistanceProvider> {
    match (radius, boundary_points) {
        (Some(r), None) => Ok(DistanceProvider::ExactL2Ball {
            radius: r,
            center: vec![0.0; dim],
        }),
        (None, Some(b)) => Ok(DistanceProvider::Approx {
            boundary: boundary(&b)?,
            alpha: norm(alpha)?,
            gamma,
        }),
        _ => Err(PyValueError::new_err(
            "give exactly one of radius or boundary_points",
        )),
    }
}

/// Truncated score matching. `radius` uses the exact distance to a centred
/// l2 ball; `boundary_points` uses the nearest-point approximation.
#[pyfunction]
#[pyo3(signature = (model, x, radius=None, boundary_points=None, alpha=2, gamma=1.0, theta0=None))]
#[allow(clippy::too_many_arguments)]
fn fit_truncsm<'py>(
    py: Python<'py>,
    model: &PyModel,
    x: Vec<Vec<f64>>,
    radius: Option<f64>,
    boundary_points: Option<Vec<Vec<f64>>>,
    alpha: u32,
    gamma: f64,
    theta0: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let x = matrix(&x)?;
    let dist = distance(radius, boundary_points, alpha, gamma, x.ncols())?;
    let fit = py
        .detach(|| estimators::fit_truncsm(model.inner.as_ref(), &x, &dist, &optim(theta0)))
        .map_err(to_py)?;
    fit_dict(py, &fit)
}

/// Boundary-weighted KSD with the approximate distance function.
#[pyfunction]
#[pyo3(signature = (model, x, boundary_points, alpha=2, gamma=1.0, bandwidth=None, theta0=None))]
#[allow(clippy::too_many_arguments)]
fn fit_bdksd<'py>(
    py: Python<'py>,
    model: &PyModel,
    x: Vec<Vec<f64>>,
    boundary_points: Vec<Vec<f64>>,
    alpha: u32,
    gamma: f64,
    bandwidth: Option<f64>,
    theta0: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let x = matrix(&x)?;
    let cfg = kernel_for(&x, bandwidth)?;
    let dist = distance(None, Some(boundary_points), alpha, gamma, x.ncols())?;
    let fit = py
        .detach(|| estimators::fit_bdksd(model.inner.as_ref(), &x, &dist, &cfg, &optim(theta0)))
        .map_err(to_py)?;
    fit_dict(py, &fit)
}

/// `m` points on the sphere of a centred lp ball.
#[pyfunction]
#[pyo3(signature = (order, radius, dim, m, seed=0))]
fn sample_ball_boundary(
    order: u32,
    radius: f64,
    dim: usize,
    m: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let ball = LpBall::centered(norm(order)?, radius, dim).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = geometry::sample_boundary_lp(&ball, m, None, &mut rng).map_err(to_py)?;
    Ok(rows(b.points()))
}

/// `m` points spread along the edges of a polygon, by length.
#[pyfunction]
#[pyo3(signature = (vertices, m, seed=0))]
fn sample_polygon_boundary(
    vertices: Vec<[f64; 2]>,
    m: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let poly = geometry::Polygon2D::new(vertices).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = geometry::sample_boundary_polygon(&poly, m, &mut rng).map_err(to_py)?;
    Ok(rows(b.points()))
}

/// Draws from `N(mean, scale I)` kept only inside a centred lp ball.
/// Returns the points and the acceptance rate.
#[pyfunction]
#[pyo3(signature = (mean, scale, order, radius, n, seed=0))]
fn sample_truncated_gaussian(
    mean: Vec<f64>,
    scale: f64,
    order: u32,
    radius: f64,
    n: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let ball = LpBall::centered(norm(order)?, radius, mean.len()).map_err(to_py)?;
    let base = GaussianSampler::isotropic(DVector::from_vec(mean), scale).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = geometry::truncated_rejection_sample(
        |r: &mut ChaCha8Rng| base.sample(r),
        &Domain::from(ball),
        n,
        &mut rng,
    )
    .map_err(to_py)?;
    Ok((rows(&s.points), s.acceptance_rate))
}

#[pyfunction]
fn epsilon_lower_bound(m: u64, d: u32, area: f64) -> PyResult<f64> {
    geometry::epsilon_lower_bound(m, d, area).map_err(to_py)
}

#[pyfunction]
fn median_heuristic(x: Vec<Vec<f64>>) -> PyResult<f64> {
    kernel::median_heuristic(&matrix(&x)?).map_err(to_py)
}

#[pyfunction]
fn load_polygon_csv(path: std::path::PathBuf) -> PyResult<Vec<[f64; 2]>> {
    Ok(geometry::load_polygon_csv(path)
        .map_err(to_py)?
        .vertices()
        .to_vec())
}

/// Run a named experiment and return its CSV output. `config` is a JSON
/// object with the same keys as the command line's config file.
#[pyfunction]
#[pyo3(signature = (experiment, config=None, seeds=None, threads=None, record_timing=true))]
fn run_experiment(
    py: Python<'_>,
    experiment: &str,
    config: Option<&str>,
    seeds: Option<usize>,
    threads: Option<usize>,
    record_timing: bool,
) -> PyResult<String> {
    let exp: harness::Experiment = experiment.parse().map_err(to_py)?;
    let mut cfg = match config {
        Some(text) => ExperimentConfig::from_json(text).map_err(to_py)?,
        None => ExperimentConfig::default(),
    };
    if cfg.experiment.is_some_and(|e| e != exp) {
        return Err(PyValueError::new_err(format!("config is not for '{exp}'")));
    }
    cfg.experiment = Some(exp);
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    cfg.threads = threads.or(cfg.threads);
    cfg.record_timing &= record_timing;
    cfg.validate().map_err(to_py)?;
    py.detach(|| harness::run_experiment(&cfg).and_then(|o| o.to_csv_string()))
        .map_err(to_py)
}

#[pymodule]
fn tksd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(tksd_vstat, m)?)?;
    m.add_function(wrap_pyfunction!(tksd_ustat, m)?)?;
    m.add_function(wrap_pyfunction!(tksd_grad, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_vstat, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_residual, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_g, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tksd, m)?)?;
    m.add_function(wrap_pyfunction!(fit_truncsm, m)?)?;
    m.add_function(wrap_pyfunction!(fit_bdksd, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ball_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(sample_polygon_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(sample_truncated_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(median_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(load_polygon_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
