use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::domain::{BoundarySample, Domain, LpBall, Polygon2D};
use crate::error::{check_dim, Result, TksdError};

/// Shifts the Gaussian proposal used by [`sample_boundary_lp`] to `s * u`
/// before normalising onto the sphere. `s > 0` concentrates boundary points
/// towards `u`, `s < 0` away from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalBias {
    strength: f64,
    direction: Vec<f64>,
}

impl DirectionalBias {
    /// `direction` is normalised to unit Euclidean length.
    pub fn new(strength: f64, direction: &[f64]) -> Result<Self> {
        let len = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(len.is_finite() && len > 0.0) || !strength.is_finite() {
            return Err(TksdError::InvalidInput(
                "bias direction must be a non-zero finite vector".into(),
            ));
        }
        Ok(Self {
            strength,
            direction: direction.iter().map(|v| v / len).collect(),
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }
}

/// Random points on the surface of an lp ball: `x' = r z / |z|_p + c` with
/// `z ~ N(s u, I)`.
pub fn sample_boundary_lp<R: Rng + ?Sized>(
    ball: &LpBall,
    m: usize,
    bias: Option<&DirectionalBias>,
    rng: &mut R,
) -> Result<BoundarySample> {
    if m == 0 {
        return Err(TksdError::InvalidInput(
            "need at least one boundary point".into(),
        ));
    }
    let d = ball.dim();
    if let Some(b) = bias {
        check_dim(d, b.direction.len())?;
    }
    let mut points = DMatrix::zeros(m, d);
    let mut z = vec![0.0; d];
    for i in 0..m {
        let norm = loop {
            for (l, zl) in z.iter_mut().enumerate() {
                let shift = bias.map_or(0.0, |b| b.strength * b.direction[l]);
                *zl = shift + rng.sample::<f64, _>(StandardNormal);
            }
            let norm = ball.norm().norm(&z);
            if norm > 0.0 {
                break norm;
            }
        };
        for l in 0..d {
            points[(i, l)] = ball.radius() * z[l] / norm + ball.center()[l];
        }
    }
    BoundarySample::new(points, Some(Domain::LpBall(ball.clone())))
}

/// Points uniform in arc length along the polygon perimeter.
pub fn sample_boundary_polygon<R: Rng + ?Sized>(
    poly: &Polygon2D,
    m: usize,
    rng: &mut R,
) -> Result<BoundarySample> {
    if m == 0 {
        return Err(TksdError::InvalidInput(
            "need at least one boundary point".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(poly.num_edges());
    let mut total = 0.0;
    for len in poly.edge_lengths() {
        total += len;
        cumulative.push(total);
    }
    let mut points = DMatrix::zeros(m, 2);
    for i in 0..m {
        let u = rng.random::<f64>() * total;
        let e = cumulative
            .partition_point(|&c| c <= u)
            .min(poly.num_edges() - 1);
        let (a, b) = poly.edge(e);
        let t = rng.random::<f64>();
        points[(i, 0)] = a[0] + t * (b[0] - a[0]);
        points[(i, 1)] = a[1] + t * (b[1] - a[1]);
    }
    BoundarySample::new(points, Some(Domain::Polygon(poly.clone())))
}

/// Multivariate normal proposal `mean + L z` with `L L^T = cov`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        let chol = nalgebra::Cholesky::new(cov.clone())
            .ok_or(TksdError::NotPositiveDefinite { jitter: 0.0 })?;
        Ok(Self {
            mean,
            factor: chol.l(),
        })
    }

    /// `N(mean, scale * I)`.
    pub fn isotropic(mean: DVector<f64>, scale: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, &DMatrix::from_diagonal_element(d, d, scale))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.mean.len();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + &self.factor * z).iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct RejectionSample {
    pub points: DMatrix<f64>,
    pub acceptance_rate: f64,
    pub proposals: u64,
}

const PROPOSAL_CHECKPOINT: u64 = 1_000_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

/// Draw from `base` until `n` proposals land inside `domain`.
pub fn truncated_rejection_sample<R, F>(
    mut base: F,
    domain: &Domain,
    n: usize,
    rng: &mut R,
) -> Result<RejectionSample>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Vec<f64>,
{
    if n == 0 {
        return Err(TksdError::InvalidInput("need at least one sample".into()));
    }
    let d = domain.dim();
    let mut points = DMatrix::zeros(n, d);
    let mut accepted = 0usize;
    let mut proposals = 0u64;
    while accepted < n {
        let x = base(rng);
        check_dim(d, x.len())?;
        proposals += 1;
        if domain.contains(&x)? {
            points.row_mut(accepted).copy_from_slice(&x);
            accepted += 1;
        }
        if proposals.is_multiple_of(PROPOSAL_CHECKPOINT) {
            let rate = accepted as f64 / proposals as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(TksdError::InfeasibleDomain { rate, proposals });
            }
        }
    }
    Ok(RejectionSample {
        points,
        acceptance_rate: n as f64 / proposals as f64,
        proposals,
    })
}
