//! Domains, seeded streams and per-method fitting shared by the runners.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TksdError};
use crate::estimators::{
    fit_bdksd, fit_tksd, fit_truncsm, DistanceProvider, FitResult, OptimConfig,
};
use crate::geometry::{
    sample_boundary_lp, sample_boundary_polygon, truncated_rejection_sample, BoundarySample,
    DirectionalBias, Domain, GaussianSampler, LpBall, LpNorm, Polygon2D, RejectionSample,
};
use crate::kernel::{Jitter, KernelConfig};
use crate::models::ScoreModel;

use super::config::{ExperimentConfig, Method};

pub const DATA_STREAM: u64 = 0;
pub const BOUNDARY_STREAM: u64 = 1;
pub const INIT_STREAM: u64 = 2;

/// Independent generator for one purpose within one trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `min(ceil(2 d^2), 200)`
pub fn default_m(d: usize) -> usize {
    (2 * d * d).min(200)
}

pub fn ball_radius(cfg: &ExperimentConfig, norm: LpNorm, d: usize) -> f64 {
    if let Some(r) = cfg.radius {
        return r;
    }
    let exp = match norm {
        LpNorm::L1 => cfg.radius_exp_l1,
        LpNorm::L2 => cfg.radius_exp_l2,
    };
    (d as f64).powf(exp)
}

/// Irregular 40-gon used as a stand-in for a country outline around
/// `(-115, 35)`. It is star-shaped about its centre, hence simple.
pub fn synthetic_polygon() -> Polygon2D {
    let (cx, cy, ax, ay) = (-98.0, 38.0, 22.0, 10.0);
    let vertices = (0..40)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 40.0;
            let f = 1.0
                + 0.12 * (3.0 * t).sin()
                + 0.08 * (5.0 * t + 1.0).cos()
                + 0.05 * (11.0 * t).sin();
            [cx + ax * f * t.cos(), cy + ay * f * t.sin()]
        })
        .collect();
    Polygon2D::new(vertices).expect("synthetic polygon is simple")
}

pub fn square_polygon(half_width: f64) -> Polygon2D {
    let h = half_width;
    Polygon2D::new(vec![[-h, -h], [h, -h], [h, h], [-h, h]]).expect("square is simple")
}

#[derive(Debug, Clone)]
pub enum DomainSetup {
    Ball(LpBall),
    Polygon(Polygon2D),
}

impl DomainSetup {
    pub fn domain(&self) -> Domain {
        match self {
            DomainSetup::Ball(b) => Domain::from(b.clone()),
            DomainSetup::Polygon(p) => Domain::from(p.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSetup::Ball(b) => b.dim(),
            DomainSetup::Polygon(_) => 2,
        }
    }

    pub fn sample_boundary(
        &self,
        m: usize,
        bias: Option<&DirectionalBias>,
        rng: &mut ChaCha8Rng,
    ) -> Result<BoundarySample> {
        match self {
            DomainSetup::Ball(b) => sample_boundary_lp(b, m, bias, rng),
            DomainSetup::Polygon(p) => sample_boundary_polygon(p, m, rng),
        }
    }

    /// Closed-form distance to the boundary, when one is available.
    pub fn exact_distance(&self) -> Option<DistanceProvider> {
        match self {
            DomainSetup::Ball(b) if b.norm() == LpNorm::L2 => Some(DistanceProvider::ExactL2Ball {
                radius: b.radius(),
                center: b.center().to_vec(),
            }),
            _ => None,
        }
    }
}

/// `N(mu, scale I)` restricted to the domain.
pub fn gaussian_data(
    domain: &DomainSetup,
    mu: &[f64],
    scale: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RejectionSample> {
    let base = GaussianSampler::isotropic(DVector::from_column_slice(mu), scale)?;
    truncated_rejection_sample(
        |r: &mut ChaCha8Rng| base.sample(r),
        &domain.domain(),
        n,
        rng,
    )
}

pub fn kernel_config(cfg: &ExperimentConfig, data: &DMatrix<f64>) -> Result<KernelConfig> {
    let kc = match cfg.bandwidth {
        Some(bw) => KernelConfig::new(bw)?,
        None => KernelConfig::from_data(data)?,
    };
    match cfg.jitter {
        Some(j) => kc.with_jitter(Jitter::Relative(j)),
        None => Ok(kc),
    }
}

/// Everything one fit needs besides the method.
pub struct FitInputs<'a> {
    pub model: &'a dyn ScoreModel,
    pub data: &'a DMatrix<f64>,
    pub boundary: &'a BoundarySample,
    pub exact: Option<&'a DistanceProvider>,
    pub kernel: KernelConfig,
    pub opt: OptimConfig,
    pub alpha: LpNorm,
    pub gamma: f64,
}

/// Fit with one of the discrepancy-based methods. The naive MLE depends on
/// the model and is handled by the runners.
pub fn fit_method(method: Method, inputs: &FitInputs<'_>) -> Result<FitResult> {
    let approx = || DistanceProvider::Approx {
        boundary: inputs.boundary.clone(),
        alpha: inputs.alpha,
        gamma: inputs.gamma,
    };
    match method {
        Method::Tksd => fit_tksd(
            inputs.model,
            inputs.data,
            inputs.boundary,
            &inputs.kernel,
            &inputs.opt,
        ),
        Method::TruncsmExact => {
            let exact = inputs
                .exact
                .ok_or_else(|| TksdError::Config("truncsm-exact needs an l2-ball domain".into()))?;
            fit_truncsm(inputs.model, inputs.data, exact, &inputs.opt)
        }
        Method::TruncsmApprox => fit_truncsm(inputs.model, inputs.data, &approx(), &inputs.opt),
        Method::BdksdApprox => fit_bdksd(
            inputs.model,
            inputs.data,
            &approx(),
            &inputs.kernel,
            &inputs.opt,
        ),
        Method::Mle => Err(TksdError::Config(
            "mle is not available for this experiment".into(),
        )),
    }
}

/// Run `f`, returning its value and elapsed milliseconds (0 when timing is
/// off, which keeps reruns byte-identical).
pub fn timed<T>(record: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    let ms = if record {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok((out, ms))
}

pub fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols()).map(|l| x.column(l).mean()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn synthetic_polygon_shape() {
        let p = synthetic_polygon();
        assert_eq!(p.num_edges(), 40);
        assert!(p.contains([-115.0, 35.0]));
        assert!(!p.contains([-125.0, 35.0]));
        let mut rng = trial_rng(0, DATA_STREAM);
        let setup = DomainSetup::Polygon(p);
        let data = gaussian_data(&setup, &[-115.0, 35.0], 10.0, 400, &mut rng).unwrap();
        assert!(
            data.acceptance_rate > 0.3 && data.acceptance_rate < 0.95,
            "{}",
            data.acceptance_rate
        );
    }

    #[test]
    fn streams_are_independent_and_repeatable() {
        let a: f64 = trial_rng(5, DATA_STREAM).random();
        let b: f64 = trial_rng(5, BOUNDARY_STREAM).random();
        let c: f64 = trial_rng(5, DATA_STREAM).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn radius_conventions() {
        let cfg = ExperimentConfig::default();
        assert!((ball_radius(&cfg, LpNorm::L2, 4) - 4f64.powf(0.53)).abs() < 1e-15);
        assert!((ball_radius(&cfg, LpNorm::L1, 4) - 4f64.powf(0.98)).abs() < 1e-15);
        assert_eq!(default_m(2), 8);
        assert_eq!(default_m(20), 200);
    }
}
