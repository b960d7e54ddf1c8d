//! Unnormalised density models described by their score
//! `psi_theta(x) = grad_x log p_theta(x)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result, TksdError};

/// A density model known only through its score.
///
/// `theta` is always passed explicitly so one model value can be evaluated
/// along an optimiser path. Conditional models need the row index of the
/// observation being scored.
pub trait ScoreModel: Send + Sync {
    fn dim_x(&self) -> usize;

    fn dim_theta(&self) -> usize;

    /// True when `psi` is affine in `theta` for every `x`.
    fn affine_in_theta(&self) -> bool;

    fn is_conditional(&self) -> bool {
        false
    }

    fn score(&self, theta: &[f64], x: &[f64], obs: Option<usize>) -> Result<DVector<f64>>;

    /// `d x p` matrix `d psi_l / d theta_j`.
    fn score_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>>;

    /// `d psi_l / d x_l` for each `l`.
    fn score_x_divergence(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DVector<f64>>;

    /// `d x p` matrix `d/d theta_j (d psi_l / d x_l)`. Central differences
    /// unless a model knows better.
    fn divergence_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>> {
        fd_theta_jacobian(theta, self.dim_x(), |t| self.score_x_divergence(t, x, obs))
    }
}

/// Central-difference Jacobian of `f` at `theta`, step `1e-5 (1 + |theta_i|)`.
pub fn fd_theta_jacobian<F>(theta: &[f64], out_dim: usize, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let p = theta.len();
    let mut jac = DMatrix::zeros(out_dim, p);
    let mut t = theta.to_vec();
    for i in 0..p {
        let h = 1e-5 * (1.0 + theta[i].abs());
        t[i] = theta[i] + h;
        let fp = f(&t)?;
        t[i] = theta[i] - h;
        let fm = f(&t)?;
        t[i] = theta[i];
        check_dim(out_dim, fp.len())?;
        jac.column_mut(i).copy_from(&((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

fn check_inputs<M: ScoreModel + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &[f64],
    obs: Option<usize>,
) -> Result<()> {
    check_dim(model.dim_theta(), theta.len())?;
    check_dim(model.dim_x(), x.len())?;
    if model.is_conditional() && obs.is_none() {
        return Err(TksdError::MissingObsIndex);
    }
    Ok(())
}

fn obs_for<M: ScoreModel + ?Sized>(model: &M, i: usize) -> Option<usize> {
    model.is_conditional().then_some(i)
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Scores of every row of `x`, as an `n x d` matrix.
pub fn score_rows<M: ScoreModel + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dim(model.dim_x(), x.ncols())?;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let s = model.score(theta, &row(x, i), obs_for(model, i))?;
        out.row_mut(i).copy_from(&s.transpose());
    }
    Ok(out)
}

/// Per-coordinate stack of `n x p` Jacobian rows: `out[l][(i, j)] = d psi_l(x_i) / d theta_j`.
pub fn jacobian_rows<M: ScoreModel + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    stack_rows(model, x, |xi, obs| {
        model.score_theta_jacobian(theta, xi, obs)
    })
}

pub fn divergence_rows<M: ScoreModel + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dim(model.dim_x(), x.ncols())?;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let s = model.score_x_divergence(theta, &row(x, i), obs_for(model, i))?;
        out.row_mut(i).copy_from(&s.transpose());
    }
    Ok(out)
}

pub fn divergence_jacobian_rows<M: ScoreModel + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    stack_rows(model, x, |xi, obs| {
        model.divergence_theta_jacobian(theta, xi, obs)
    })
}

fn stack_rows<M, F>(model: &M, x: &DMatrix<f64>, f: F) -> Result<Vec<DMatrix<f64>>>
where
    M: ScoreModel + ?Sized,
    F: Fn(&[f64], Option<usize>) -> Result<DMatrix<f64>>,
{
    check_dim(model.dim_x(), x.ncols())?;
    let (n, d, p) = (x.nrows(), model.dim_x(), model.dim_theta());
    let mut out = vec![DMatrix::zeros(n, p); d];
    for i in 0..n {
        let jac = f(&row(x, i), obs_for(model, i))?;
        for (l, block) in out.iter_mut().enumerate() {
            block.row_mut(i).copy_from(&jac.row(l));
        }
    }
    Ok(out)
}

/// `N(mu, Sigma)` with known covariance; `theta = mu`.
#[derive(Debug, Clone)]
pub struct GaussianMeanModel {
    precision: DMatrix<f64>,
}

impl GaussianMeanModel {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() == 0 {
            return Err(TksdError::InvalidInput(
                "covariance must be a non-empty square matrix".into(),
            ));
        }
        let chol = nalgebra::Cholesky::new(covariance)
            .ok_or(TksdError::NotPositiveDefinite { jitter: 0.0 })?;
        Ok(Self {
            precision: chol.inverse(),
        })
    }

    /// `Sigma = scale * I_d`.
    pub fn isotropic(d: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(d, d, scale))
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl ScoreModel for GaussianMeanModel {
    fn dim_x(&self) -> usize {
        self.precision.nrows()
    }

    fn dim_theta(&self) -> usize {
        self.precision.nrows()
    }

    fn affine_in_theta(&self) -> bool {
        true
    }

    fn score(&self, theta: &[f64], x: &[f64], obs: Option<usize>) -> Result<DVector<f64>> {
        check_inputs(self, theta, x, obs)?;
        let diff = DVector::from_iterator(x.len(), theta.iter().zip(x).map(|(m, v)| m - v));
        Ok(&self.precision * diff)
    }

    fn score_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>> {
        check_inputs(self, theta, x, obs)?;
        Ok(self.precision.clone())
    }

    fn score_x_divergence(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DVector<f64>> {
        check_inputs(self, theta, x, obs)?;
        Ok(-self.precision.diagonal())
    }

    fn divergence_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>> {
        check_inputs(self, theta, x, obs)?;
        Ok(DMatrix::zeros(self.dim_x(), self.dim_theta()))
    }
}

/// Equal-weight mixture of `K` unit-covariance Gaussians; `theta` stacks the
/// component means `(mu_1, ..., mu_K)`.
#[derive(Debug, Clone)]
pub struct GaussianMixtureMeansModel {
    components: usize,
    dim: usize,
}

impl GaussianMixtureMeansModel {
    pub fn new(components: usize, dim: usize) -> Result<Self> {
        if components == 0 || dim == 0 {
            return Err(TksdError::InvalidInput(
                "mixture needs at least one component and dimension".into(),
            ));
        }
        Ok(Self { components, dim })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Posterior component weights `w_k(x)` and offsets `mu_k - x`.
    pub fn responsibilities(&self, theta: &[f64], x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let offsets: Vec<Vec<f64>> = theta
            .chunks(self.dim)
            .map(|mu| mu.iter().zip(x).map(|(m, v)| m - v).collect())
            .collect();
        let logits: Vec<f64> = offsets
            .iter()
            .map(|a: &Vec<f64>| -0.5 * a.iter().map(|v| v * v).sum::<f64>())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        (w, offsets)
    }
}

impl ScoreModel for GaussianMixtureMeansModel {
    fn dim_x(&self) -> usize {
        self.dim
    }

    fn dim_theta(&self) -> usize {
        self.components * self.dim
    }

    fn affine_in_theta(&self) -> bool {
        false
    }

    fn score(&self, theta: &[f64], x: &[f64], obs: Option<usize>) -> Result<DVector<f64>> {
        check_inputs(self, theta, x, obs)?;
        let (w, a) = self.responsibilities(theta, x);
        Ok(DVector::from_fn(self.dim, |l, _| {
            w.iter().zip(&a).map(|(wk, ak)| wk * ak[l]).sum()
        }))
    }

    fn score_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>> {
        check_inputs(self, theta, x, obs)?;
        fd_theta_jacobian(theta, self.dim, |t| self.score(t, x, obs))
    }

    fn score_x_divergence(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DVector<f64>> {
        check_inputs(self, theta, x, obs)?;
        let (w, a) = self.responsibilities(theta, x);
        Ok(DVector::from_fn(self.dim, |l, _| {
            let mut second = 0.0;
            let mut first = 0.0;
            for (wk, ak) in w.iter().zip(&a) {
                second += wk * (ak[l] * ak[l] - 1.0);
                first += wk * ak[l];
            }
            second - first * first
        }))
    }
}

/// `y_i ~ N(beta_0 + beta_1 c_i, 1)` scored in the response `y`;
/// `theta = (beta_0, beta_1)`.
#[derive(Debug, Clone)]
pub struct TruncatedRegressionModel {
    covariates: Vec<f64>,
}

impl TruncatedRegressionModel {
    pub fn new(covariates: Vec<f64>) -> Result<Self> {
        if covariates.is_empty() || covariates.iter().any(|c| !c.is_finite()) {
            return Err(TksdError::InvalidInput(
                "covariates must be a non-empty finite vector".into(),
            ));
        }
        Ok(Self { covariates })
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    fn covariate(&self, obs: Option<usize>) -> Result<f64> {
        let i = obs.ok_or(TksdError::MissingObsIndex)?;
        self.covariates.get(i).copied().ok_or_else(|| {
            TksdError::InvalidInput(format!(
                "observation {i} out of range ({} covariates)",
                self.covariates.len()
            ))
        })
    }
}

impl ScoreModel for TruncatedRegressionModel {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn affine_in_theta(&self) -> bool {
        true
    }

    fn is_conditional(&self) -> bool {
        true
    }

    fn score(&self, theta: &[f64], x: &[f64], obs: Option<usize>) -> Result<DVector<f64>> {
        check_inputs(self, theta, x, obs)?;
        let c = self.covariate(obs)?;
        Ok(DVector::from_element(1, theta[0] + theta[1] * c - x[0]))
    }

    fn score_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>> {
        check_inputs(self, theta, x, obs)?;
        let c = self.covariate(obs)?;
        Ok(DMatrix::from_row_slice(1, 2, &[1.0, c]))
    }

    fn score_x_divergence(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DVector<f64>> {
        check_inputs(self, theta, x, obs)?;
        self.covariate(obs)?;
        Ok(DVector::from_element(1, -1.0))
    }

    fn divergence_theta_jacobian(
        &self,
        theta: &[f64],
        x: &[f64],
        obs: Option<usize>,
    ) -> Result<DMatrix<f64>> {
        check_inputs(self, theta, x, obs)?;
        Ok(DMatrix::zeros(1, 2))
    }
}

/// Ordinary least squares `y = b0 + b1 c`, ignoring any truncation.
pub fn ols_fit(c: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_dim(c.len(), y.len())?;
    let n = c.len();
    if n < 2 {
        return Err(TksdError::InvalidInput(format!(
            "least squares needs at least 2 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let c_mean = c.iter().sum::<f64>() / nf;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (ci, yi) in c.iter().zip(y) {
        sxx += (ci - c_mean) * (ci - c_mean);
        sxy += (ci - c_mean) * (yi - y_mean);
    }
    let scale = c.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if sxx <= 1e-14 * scale {
        return Err(TksdError::Singular(
            "covariate is constant; design matrix is rank deficient".into(),
        ));
    }
    let b1 = sxy / sxx;
    Ok((y_mean - b1 * c_mean, b1))
}
