use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Result, TksdError};
use crate::estimators::OptimConfig;
use crate::geometry::{
    epsilon_lower_bound, load_polygon_csv, truncated_rejection_sample, unit_ball_volume,
    DirectionalBias, LpBall, LpNorm,
};
use crate::models::{
    ols_fit, GaussianMeanModel, GaussianMixtureMeansModel, TruncatedRegressionModel,
};

use super::config::{DomainKind, Experiment, ExperimentConfig, Method};
use super::record::{
    l2_error, records_to_csv_string, records_to_json, write_records_csv, Summary, Table,
    TrialRecord,
};
use super::setup::{
    ball_radius, column_means, default_m, fit_method, gaussian_data, kernel_config, square_polygon,
    synthetic_polygon, timed, trial_rng, DomainSetup, FitInputs, BOUNDARY_STREAM, DATA_STREAM,
    INIT_STREAM,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Trials(Vec<TrialRecord>),
    Table(Table),
}

impl ExperimentOutput {
    pub fn to_csv_string(&self) -> Result<String> {
        match self {
            ExperimentOutput::Trials(r) => records_to_csv_string(r),
            ExperimentOutput::Table(t) => t.to_csv_string(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            ExperimentOutput::Trials(r) => records_to_json(r),
            ExperimentOutput::Table(t) => t.to_json(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            ExperimentOutput::Trials(r) => write_records_csv(r, w),
            ExperimentOutput::Table(t) => t.write_csv(w),
        }
    }

    pub fn records(&self) -> Option<&[TrialRecord]> {
        match self {
            ExperimentOutput::Trials(r) => Some(r),
            ExperimentOutput::Table(_) => None,
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match self {
            ExperimentOutput::Table(t) => Some(t),
            ExperimentOutput::Trials(_) => None,
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    Ok(match cfg.experiment()? {
        Experiment::Estimate => ExperimentOutput::Trials(run_estimate(cfg)?),
        Experiment::PolygonBench => ExperimentOutput::Trials(run_polygon_bench(cfg)?),
        Experiment::DimBench => ExperimentOutput::Trials(run_dim_bench(cfg)?),
        Experiment::Consistency => ExperimentOutput::Table(run_consistency(cfg)?.to_table()),
        Experiment::Mixture => ExperimentOutput::Trials(run_mixture(cfg)?),
        Experiment::Regression => ExperimentOutput::Trials(run_regression(cfg)?),
        Experiment::BoundaryDist => ExperimentOutput::Trials(run_boundary_dist(cfg)?),
        Experiment::Retention => ExperimentOutput::Table(run_retention(cfg)?),
        Experiment::EpsilonTable => ExperimentOutput::Table(run_epsilon_table(cfg)?),
    })
}

/// Apply `f` to every seed, in parallel when a pool is available, keeping
/// seed order in the result.
fn map_seeds<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let seeds: Vec<u64> = (0..cfg.seeds as u64)
        .map(|t| cfg.base_seed.wrapping_add(t))
        .collect();
    let work = || {
        seeds
            .par_iter()
            .map(|&seed| {
                f(seed).map_err(|e| TksdError::Trial {
                    seed,
                    source: Box::new(e),
                })
            })
            .collect::<Vec<_>>()
    };
    let results = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| TksdError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    results.into_iter().collect()
}

fn run_trials<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(u64) -> Result<Vec<TrialRecord>> + Sync + Send,
{
    let mut out: Vec<TrialRecord> = map_seeds(cfg, f)?.into_iter().flatten().collect();
    out.sort_by(|a, b| (a.seed, &a.method).cmp(&(b.seed, &b.method)));
    Ok(out)
}

fn opt_config() -> OptimConfig {
    OptimConfig::default()
}

struct GaussianSetup<'a> {
    domain: &'a DomainSetup,
    mu: &'a [f64],
    scale: f64,
    n: usize,
    m_list: &'a [usize],
    methods: &'a [Method],
    bias: Option<(&'a DirectionalBias, &'a str)>,
}

fn gaussian_trial(
    cfg: &ExperimentConfig,
    trial: &GaussianSetup<'_>,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let d = trial.domain.dim();
    let sample = gaussian_data(
        trial.domain,
        trial.mu,
        trial.scale,
        trial.n,
        &mut trial_rng(seed, DATA_STREAM),
    )?;
    let data = &sample.points;
    let model = GaussianMeanModel::isotropic(d, trial.scale)?;
    let kernel = kernel_config(cfg, data)?;
    let exact = trial.domain.exact_distance();
    let mut out = Vec::new();
    for &m in trial.m_list {
        let boundary = trial.domain.sample_boundary(
            m,
            trial.bias.map(|b| b.0),
            &mut trial_rng(seed, BOUNDARY_STREAM),
        )?;
        let inputs = FitInputs {
            model: &model,
            data,
            boundary: &boundary,
            exact: exact.as_ref(),
            kernel,
            opt: opt_config(),
            alpha: cfg.alpha_norm()?,
            gamma: cfg.gamma,
        };
        for &method in trial.methods {
            let ((theta, converged), ms) = timed(cfg.record_timing, || {
                if method == Method::Mle {
                    return Ok((column_means(data), true));
                }
                let fit = fit_method(method, &inputs)?;
                Ok((
                    fit.theta_hat.iter().copied().collect::<Vec<_>>(),
                    fit.converged,
                ))
            })?;
            let label = match trial.bias {
                Some((_, tag)) => format!("{method}-{tag}"),
                None => method.to_string(),
            };
            out.push(TrialRecord {
                seed,
                method: label,
                n: trial.n,
                m,
                d,
                error: l2_error(&theta, trial.mu),
                wall_time_ms: ms,
                converged,
                theta_hat: theta,
                acceptance_rate: sample.acceptance_rate,
                metrics: BTreeMap::new(),
            });
        }
    }
    Ok(out)
}

fn mu_or_default(
    cfg: &ExperimentConfig,
    d: usize,
    default: impl FnOnce() -> Vec<f64>,
) -> Result<Vec<f64>> {
    let mu = cfg.mu_star.clone().unwrap_or_else(default);
    if mu.len() != d {
        return Err(TksdError::Config(format!(
            "mu_star has {} entries but the domain is {d}-dimensional",
            mu.len()
        )));
    }
    Ok(mu)
}

fn polygon_domain(cfg: &ExperimentConfig) -> Result<DomainSetup> {
    let poly = match &cfg.polygon_path {
        Some(path) => load_polygon_csv(path)?,
        None => synthetic_polygon(),
    };
    Ok(DomainSetup::Polygon(poly))
}

fn ball_domain(cfg: &ExperimentConfig, kind: DomainKind, d: usize) -> Result<DomainSetup> {
    let norm = kind.norm().expect("ball kind");
    Ok(DomainSetup::Ball(LpBall::centered(
        norm,
        ball_radius(cfg, norm, d),
        d,
    )?))
}

fn check_exact(methods: &[Method], domain: &DomainSetup) -> Result<()> {
    if methods.contains(&Method::TruncsmExact) && domain.exact_distance().is_none() {
        return Err(TksdError::Config(
            "truncsm-exact is only available on l2-ball domains".into(),
        ));
    }
    Ok(())
}

/// Single setup: any domain, Gaussian with known isotropic covariance.
pub fn run_estimate(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let kind = cfg.domain.unwrap_or(DomainKind::L2Ball);
    let (domain, mu, scale) = if kind == DomainKind::Polygon {
        let mu = mu_or_default(cfg, 2, || vec![-115.0, 35.0])?;
        (polygon_domain(cfg)?, mu, cfg.sigma_scale.unwrap_or(10.0))
    } else {
        let d = cfg.d.or(cfg.mu_star.as_ref().map(Vec::len)).unwrap_or(2);
        let mu = mu_or_default(cfg, d, || vec![0.5; d])?;
        (
            ball_domain(cfg, kind, d)?,
            mu,
            cfg.sigma_scale.unwrap_or(1.0),
        )
    };
    let d = domain.dim();
    let m_list = cfg
        .m_list
        .clone()
        .unwrap_or_else(|| vec![cfg.m.unwrap_or(default_m(d))]);
    let methods = cfg
        .methods
        .clone()
        .unwrap_or_else(|| vec![Method::Tksd, Method::TruncsmApprox]);
    check_exact(&methods, &domain)?;
    let trial = GaussianSetup {
        domain: &domain,
        mu: &mu,
        scale,
        n: cfg.n.unwrap_or(300),
        m_list: &m_list,
        methods: &methods,
        bias: None,
    };
    run_trials(cfg, |seed| gaussian_trial(cfg, &trial, seed))
}

/// Polygon domain, `N((-115, 35), 10 I)`, several boundary sizes.
pub fn run_polygon_bench(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let domain = polygon_domain(cfg)?;
    let mu = mu_or_default(cfg, 2, || vec![-115.0, 35.0])?;
    let m_list = cfg.m_list.clone().unwrap_or_else(|| vec![8, 32, 128]);
    let methods = cfg
        .methods
        .clone()
        .unwrap_or_else(|| vec![Method::Tksd, Method::TruncsmApprox]);
    check_exact(&methods, &domain)?;
    let trial = GaussianSetup {
        domain: &domain,
        mu: &mu,
        scale: cfg.sigma_scale.unwrap_or(10.0),
        n: cfg.n.unwrap_or(400),
        m_list: &m_list,
        methods: &methods,
        bias: None,
    };
    run_trials(cfg, |seed| gaussian_trial(cfg, &trial, seed))
}

/// `N(0.5 * 1_d, I)` truncated to an l1 or l2 ball, across dimensions.
pub fn run_dim_bench(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let kind = cfg.domain.unwrap_or(DomainKind::L2Ball);
    if kind == DomainKind::Polygon {
        return Err(TksdError::Config("dim-bench needs a ball domain".into()));
    }
    let dims = cfg.dims.clone().unwrap_or_else(|| vec![2, 4, 8]);
    let methods = cfg.methods.clone().unwrap_or_else(|| {
        let mut v = vec![Method::Tksd];
        if kind == DomainKind::L2Ball {
            v.push(Method::TruncsmExact);
        }
        v.extend([Method::TruncsmApprox, Method::BdksdApprox]);
        v
    });
    let setups = dims
        .iter()
        .map(|&d| {
            let domain = ball_domain(cfg, kind, d)?;
            check_exact(&methods, &domain)?;
            Ok((domain, vec![0.5; d], vec![cfg.m.unwrap_or(default_m(d))]))
        })
        .collect::<Result<Vec<_>>>()?;
    run_trials(cfg, |seed| {
        let mut out = Vec::new();
        for (domain, mu, m_list) in &setups {
            let trial = GaussianSetup {
                domain,
                mu,
                scale: cfg.sigma_scale.unwrap_or(1.0),
                n: cfg.n.unwrap_or(300),
                m_list,
                methods: &methods,
                bias: None,
            };
            out.extend(gaussian_trial(cfg, &trial, seed)?);
        }
        Ok(out)
    })
}

/// Mean TKSD error over an `(n, m)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyGrid {
    pub n_list: Vec<usize>,
    pub m_list: Vec<usize>,
    /// `mean[(i, j)]` is the mean error at `n_list[i]`, `m_list[j]`.
    pub mean: DMatrix<f64>,
    pub se: DMatrix<f64>,
    pub records: Vec<TrialRecord>,
}

impl ConsistencyGrid {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "m", "mean_error", "se_error", "trials"]);
        for (i, n) in self.n_list.iter().enumerate() {
            for (j, m) in self.m_list.iter().enumerate() {
                let count = self
                    .records
                    .iter()
                    .filter(|r| r.n == *n && r.m == *m)
                    .count();
                t.push(vec![
                    n.to_string(),
                    m.to_string(),
                    self.mean[(i, j)].to_string(),
                    self.se[(i, j)].to_string(),
                    count.to_string(),
                ]);
            }
        }
        t
    }
}

/// 2D Gaussian at `(0.5, 0.5)` in the unit l2 ball, TKSD over an `(n, m)` grid.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<ConsistencyGrid> {
    let n_list = cfg
        .n_list
        .clone()
        .unwrap_or_else(|| vec![64, 128, 256, 512]);
    let m_list = cfg.m_list.clone().unwrap_or_else(|| vec![4, 8, 16, 32]);
    let domain = DomainSetup::Ball(LpBall::centered(LpNorm::L2, cfg.radius.unwrap_or(1.0), 2)?);
    let mu = mu_or_default(cfg, 2, || vec![0.5, 0.5])?;
    let methods = cfg.methods.clone().unwrap_or_else(|| vec![Method::Tksd]);
    check_exact(&methods, &domain)?;
    let records = run_trials(cfg, |seed| {
        let mut out = Vec::new();
        for &n in &n_list {
            let trial = GaussianSetup {
                domain: &domain,
                mu: &mu,
                scale: cfg.sigma_scale.unwrap_or(1.0),
                n,
                m_list: &m_list,
                methods: &methods,
                bias: None,
            };
            out.extend(gaussian_trial(cfg, &trial, seed)?);
        }
        Ok(out)
    })?;
    let primary = methods[0].to_string();
    let mut mean = DMatrix::zeros(n_list.len(), m_list.len());
    let mut se = DMatrix::zeros(n_list.len(), m_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        for (j, &m) in m_list.iter().enumerate() {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n && r.m == m && r.method == primary)
                .map(|r| r.error)
                .collect();
            let s = Summary::of(&errs);
            mean[(i, j)] = s.mean;
            se[(i, j)] = s.se;
        }
    }
    Ok(ConsistencyGrid {
        n_list,
        m_list,
        mean,
        se,
        records,
    })
}

const MIXTURE_MODES: [[f64; 2]; 4] = [[1.5, 1.5], [-1.5, -1.5], [-1.5, 1.5], [1.5, -1.5]];

/// Equal-weight mixture of `N(mu_k, I)` in the box `[-3, 3]^2`, estimating
/// all means from a perturbed start.
pub fn run_mixture(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let modes_list = cfg.mixture_modes.clone().unwrap_or_else(|| vec![2]);
    if let Some(k) = modes_list
        .iter()
        .find(|k| **k == 0 || **k > MIXTURE_MODES.len())
    {
        return Err(TksdError::Config(format!(
            "mixture_modes must be in 1..=4, got {k}"
        )));
    }
    let n_list = cfg
        .n_list
        .clone()
        .unwrap_or_else(|| vec![cfg.n.unwrap_or(300)]);
    let m = cfg.m.unwrap_or(200);
    let methods = cfg
        .methods
        .clone()
        .unwrap_or_else(|| vec![Method::Tksd, Method::TruncsmApprox]);
    let domain = DomainSetup::Polygon(square_polygon(3.0));
    check_exact(&methods, &domain)?;
    run_trials(cfg, |seed| {
        let mut out = Vec::new();
        let boundary = domain.sample_boundary(m, None, &mut trial_rng(seed, BOUNDARY_STREAM))?;
        for &k in &modes_list {
            let truth: Vec<f64> = MIXTURE_MODES[..k].iter().flatten().copied().collect();
            let model = GaussianMixtureMeansModel::new(k, 2)?;
            let mut init_rng = trial_rng(seed, INIT_STREAM);
            let noise = cfg.init_noise.sqrt();
            let theta0: Vec<f64> = truth
                .iter()
                .map(|t| t + noise * init_rng.sample::<f64, _>(StandardNormal))
                .collect();
            for &n in &n_list {
                let sample = truncated_rejection_sample(
                    |r: &mut ChaCha8Rng| {
                        let c = r.random_range(0..k);
                        MIXTURE_MODES[c]
                            .iter()
                            .map(|mu| mu + r.sample::<f64, _>(StandardNormal))
                            .collect()
                    },
                    &domain.domain(),
                    n,
                    &mut trial_rng(seed, DATA_STREAM),
                )?;
                let inputs = FitInputs {
                    model: &model,
                    data: &sample.points,
                    boundary: &boundary,
                    exact: None,
                    kernel: kernel_config(cfg, &sample.points)?,
                    opt: opt_config().with_theta0(DVector::from_vec(theta0.clone())),
                    alpha: cfg.alpha_norm()?,
                    gamma: cfg.gamma,
                };
                for &method in &methods {
                    let (fit, ms) = timed(cfg.record_timing, || fit_method(method, &inputs))?;
                    let theta: Vec<f64> = fit.theta_hat.iter().copied().collect();
                    let mut metrics = BTreeMap::new();
                    metrics.insert("modes".to_string(), k as f64);
                    out.push(TrialRecord {
                        seed,
                        method: method.to_string(),
                        n,
                        m,
                        d: 2,
                        error: l2_error(&theta, &truth),
                        wall_time_ms: ms,
                        converged: fit.converged,
                        theta_hat: theta,
                        acceptance_rate: sample.acceptance_rate,
                        metrics,
                    });
                }
            }
        }
        Ok(out)
    })
}

/// Covariates, responses and the discarded pairs of one truncated
/// regression sample.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    pub c_obs: Vec<f64>,
    pub y_obs: Vec<f64>,
    pub c_unobs: Vec<f64>,
    pub y_unobs: Vec<f64>,
}

/// `c ~ U(0, 1)`, `y ~ N(beta_0 + beta_1 c, 1)`, keeping `y >= threshold`
/// until `n` pairs are observed.
pub fn regression_sample(
    beta: [f64; 2],
    threshold: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionSample> {
    let mut s = RegressionSample {
        c_obs: Vec::with_capacity(n),
        y_obs: Vec::with_capacity(n),
        c_unobs: Vec::new(),
        y_unobs: Vec::new(),
    };
    let mut proposals: u64 = 0;
    while s.y_obs.len() < n {
        let c: f64 = rng.random();
        let y = beta[0] + beta[1] * c + rng.sample::<f64, _>(StandardNormal);
        proposals += 1;
        if y >= threshold {
            s.c_obs.push(c);
            s.y_obs.push(y);
        } else {
            s.c_unobs.push(c);
            s.y_unobs.push(y);
        }
        if proposals.is_multiple_of(1_000_000) {
            let rate = s.y_obs.len() as f64 / proposals as f64;
            if rate < 1e-4 {
                return Err(TksdError::InfeasibleDomain { rate, proposals });
            }
        }
    }
    Ok(s)
}

fn gaussian_loglik(c: &[f64], y: &[f64], beta: &[f64]) -> f64 {
    if y.is_empty() {
        return f64::NAN;
    }
    let total: f64 = c
        .iter()
        .zip(y)
        .map(|(c, y)| {
            let r = y - beta[0] - beta[1] * c;
            -0.5 * (2.0 * PI).ln() - 0.5 * r * r
        })
        .sum();
    total / y.len() as f64
}

fn mse(c: &[f64], y: &[f64], beta: &[f64]) -> f64 {
    if y.is_empty() {
        return f64::NAN;
    }
    c.iter()
        .zip(y)
        .map(|(c, y)| (beta[0] + beta[1] * c - y).powi(2))
        .sum::<f64>()
        / y.len() as f64
}

/// Linear regression with the response truncated from below; TKSD in
/// response space against ordinary least squares.
pub fn run_regression(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let n = cfg.n.unwrap_or(200);
    let methods = cfg
        .methods
        .clone()
        .unwrap_or_else(|| vec![Method::Tksd, Method::Mle]);
    if methods.contains(&Method::TruncsmExact) {
        return Err(TksdError::Config(
            "truncsm-exact is not available for regression".into(),
        ));
    }
    let beta = cfg.beta_star;
    run_trials(cfg, |seed| {
        let s = regression_sample(beta, cfg.truncation, n, &mut trial_rng(seed, DATA_STREAM))?;
        let total = (s.y_obs.len() + s.y_unobs.len()) as f64;
        let y = DMatrix::from_column_slice(n, 1, &s.y_obs);
        let boundary = crate::geometry::BoundarySample::new(
            DMatrix::from_element(1, 1, cfg.truncation),
            None,
        )?;
        let model = TruncatedRegressionModel::new(s.c_obs.clone())?;
        let inputs = FitInputs {
            model: &model,
            data: &y,
            boundary: &boundary,
            exact: None,
            kernel: kernel_config(cfg, &y)?,
            opt: opt_config(),
            alpha: cfg.alpha_norm()?,
            gamma: cfg.gamma,
        };
        let mut out = Vec::new();
        for &method in &methods {
            let ((theta, converged), ms) = timed(cfg.record_timing, || {
                if method == Method::Mle {
                    let (b0, b1) = ols_fit(&s.c_obs, &s.y_obs)?;
                    return Ok((vec![b0, b1], true));
                }
                let fit = fit_method(method, &inputs)?;
                Ok((
                    fit.theta_hat.iter().copied().collect::<Vec<_>>(),
                    fit.converged,
                ))
            })?;
            let mut metrics = BTreeMap::new();
            metrics.insert(
                "obs_loglik".into(),
                gaussian_loglik(&s.c_obs, &s.y_obs, &theta),
            );
            metrics.insert(
                "unobs_loglik".into(),
                gaussian_loglik(&s.c_unobs, &s.y_unobs, &theta),
            );
            metrics.insert("unobs_mse".into(), mse(&s.c_unobs, &s.y_unobs, &theta));
            metrics.insert("n_unobs".into(), s.y_unobs.len() as f64);
            out.push(TrialRecord {
                seed,
                method: method.to_string(),
                n,
                m: 1,
                d: 1,
                error: l2_error(&theta, &beta),
                wall_time_ms: ms,
                converged,
                theta_hat: theta,
                acceptance_rate: n as f64 / total,
                metrics,
            });
        }
        Ok(out)
    })
}

/// Boundary points biased towards, away from, or uniformly around the
/// data mean, on the unit l2 ball with `mu = (1, 1)`.
pub fn run_boundary_dist(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let domain = DomainSetup::Ball(LpBall::centered(LpNorm::L2, cfg.radius.unwrap_or(1.0), 2)?);
    let mu = mu_or_default(cfg, 2, || vec![1.0, 1.0])?;
    let methods = cfg.methods.clone().unwrap_or_else(|| vec![Method::Tksd]);
    check_exact(&methods, &domain)?;
    let m_list = vec![cfg.m.unwrap_or(30)];
    let s = cfg.bias_strength;
    let scenarios = [
        (DirectionalBias::new(s, &mu)?, "toward"),
        (DirectionalBias::new(-s, &mu)?, "away"),
        (DirectionalBias::new(0.0, &mu)?, "uniform"),
    ];
    run_trials(cfg, |seed| {
        let mut out = Vec::new();
        for (bias, tag) in &scenarios {
            let trial = GaussianSetup {
                domain: &domain,
                mu: &mu,
                scale: cfg.sigma_scale.unwrap_or(1.0),
                n: cfg.n.unwrap_or(400),
                m_list: &m_list,
                methods: &methods,
                bias: Some((bias, tag)),
            };
            out.extend(gaussian_trial(cfg, &trial, seed)?);
        }
        Ok(out)
    })
}

/// Fraction of `N(0.5 * 1_d, I)` draws inside the l1 and l2 balls, for both
/// radius-exponent assignments.
pub fn run_retention(cfg: &ExperimentConfig) -> Result<Table> {
    let dims = cfg.dims.clone().unwrap_or_else(|| (2..=10).collect());
    let proposals = cfg.retention_proposals;
    let conventions = [
        ("configured", cfg.radius_exp_l1, cfg.radius_exp_l2),
        ("swapped", cfg.radius_exp_l2, cfg.radius_exp_l1),
    ];
    let mut cells = Vec::new();
    for &d in &dims {
        for norm in [LpNorm::L1, LpNorm::L2] {
            for (name, e1, e2) in conventions {
                let exp = if norm == LpNorm::L1 { e1 } else { e2 };
                let radius = cfg.radius.unwrap_or((d as f64).powf(exp));
                cells.push((d, norm, name, radius));
            }
        }
    }
    let per_seed = map_seeds(cfg, |seed| {
        let mut rng = trial_rng(seed, DATA_STREAM);
        Ok(cells
            .iter()
            .map(|&(d, norm, _, radius)| {
                let kept = (0..proposals)
                    .filter(|_| {
                        let x: Vec<f64> = (0..d)
                            .map(|_| 0.5 + rng.sample::<f64, _>(StandardNormal))
                            .collect();
                        norm.norm(&x) <= radius
                    })
                    .count();
                kept as f64 / proposals as f64
            })
            .collect::<Vec<f64>>())
    })?;
    let mut t = Table::new(&[
        "d",
        "norm",
        "convention",
        "radius",
        "retention_mean",
        "retention_se",
    ]);
    for (c, &(d, norm, name, radius)) in cells.iter().enumerate() {
        let vals: Vec<f64> = per_seed.iter().map(|v| v[c]).collect();
        let s = Summary::of(&vals);
        t.push(vec![
            d.to_string(),
            format!("l{}", norm.order()),
            name.to_string(),
            radius.to_string(),
            s.mean.to_string(),
            s.se.to_string(),
        ]);
    }
    Ok(t)
}

/// Lower bound on the boundary covering radius over `(m, d, area)`. The
/// area defaults to the surface of the unit sphere in each dimension.
pub fn run_epsilon_table(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&["m", "d", "area", "epsilon"]);
    for &d in &cfg.eps_d {
        let areas = match &cfg.eps_area {
            Some(a) => a.clone(),
            None => vec![d as f64 * unit_ball_volume(d)],
        };
        for &area in &areas {
            for &m in &cfg.eps_m {
                let eps = epsilon_lower_bound(m, d, area)?;
                t.push(vec![
                    m.to_string(),
                    d.to_string(),
                    area.to_string(),
                    eps.to_string(),
                ]);
            }
        }
    }
    Ok(t)
}

/// True when every fit in the records reports the closed-form path or
/// convergence.
pub fn all_converged(records: &[TrialRecord]) -> bool {
    records.iter().all(|r| r.converged)
}
