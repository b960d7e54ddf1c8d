//! Gaussian kernel evaluations, Gram assembly and regularised SPD solves.
//!
//! The kernel is `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`. Only the
//! first derivatives in each argument and the same-coordinate cross
//! derivative `d/dx_l d/dy_l k` are provided; nothing downstream needs
//! the full Hessian.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Result, TksdError};

/// Diagonal regularisation added before factorising a Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jitter {
    /// `factor * trace(K) / m`, so the jitter follows the matrix scale.
    Relative(f64),
    /// A fixed value added to every diagonal entry.
    Absolute(f64),
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter::Relative(1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub jitter: Jitter,
    /// Maximum number of x10 jitter escalations before giving up.
    pub jitter_growth_limit: u32,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(TksdError::InvalidInput(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self {
            bandwidth,
            jitter: Jitter::default(),
            jitter_growth_limit: 6,
        })
    }

    /// Bandwidth from the median heuristic on `x`.
    pub fn from_data(x: &DMatrix<f64>) -> Result<Self> {
        Self::new(median_heuristic(x)?)
    }

    pub fn with_jitter(mut self, jitter: Jitter) -> Result<Self> {
        let v = match jitter {
            Jitter::Relative(v) | Jitter::Absolute(v) => v,
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(TksdError::InvalidInput(format!(
                "jitter must be non-negative, got {v}"
            )));
        }
        self.jitter = jitter;
        Ok(self)
    }

    pub fn with_growth_limit(mut self, limit: u32) -> Self {
        self.jitter_growth_limit = limit;
        self
    }

    fn resolve_jitter(&self, k: &DMatrix<f64>) -> f64 {
        match self.jitter {
            Jitter::Absolute(v) => v,
            Jitter::Relative(f) => f * diag_scale(k),
        }
    }
}

fn diag_scale(k: &DMatrix<f64>) -> f64 {
    let m = k.nrows().max(1) as f64;
    let s = k.trace() / m;
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Kernel value and its derivatives at one pair `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBundle {
    pub k: f64,
    pub dkx: DVector<f64>,
    pub dky: DVector<f64>,
    /// `d/dx_l d/dy_l k` for each coordinate `l`.
    pub dkxy: DVector<f64>,
}

/// Median of all pairwise Euclidean distances between the rows of `x`.
pub fn median_heuristic(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(TksdError::InvalidInput(format!(
            "median heuristic needs at least 2 points, got {n}"
        )));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(sq_dist_rows(x, i, x, j).sqrt());
        }
    }
    let len = dists.len();
    let mid = len / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if len % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid]
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .unwrap_or(upper);
        0.5 * (lower + upper)
    };
    if median <= 0.0 {
        return Err(TksdError::DegenerateData(
            "median pairwise distance is zero; set the bandwidth explicitly".into(),
        ));
    }
    Ok(median)
}

#[inline]
pub(crate) fn sq_dist_rows(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let t = a[(i, c)] - b[(j, c)];
        s += t * t;
    }
    s
}

#[inline]
pub(crate) fn kernel_from_sq(sq: f64, bandwidth: f64) -> f64 {
    (-sq / (2.0 * bandwidth * bandwidth)).exp()
}

/// Kernel value at `(x, y)`.
pub fn kernel_value(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(kernel_from_sq(sq, cfg.bandwidth))
}

pub fn kernel_bundle(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<KernelBundle> {
    let k = kernel_value(x, y, cfg)?;
    let s2 = cfg.bandwidth * cfg.bandwidth;
    let d = x.len();
    let mut dkx = DVector::zeros(d);
    let mut dky = DVector::zeros(d);
    let mut dkxy = DVector::zeros(d);
    for l in 0..d {
        let diff = x[l] - y[l];
        dkx[l] = -(diff / s2) * k;
        dky[l] = (diff / s2) * k;
        dkxy[l] = k * (1.0 / s2 - diff * diff / (s2 * s2));
    }
    Ok(KernelBundle { k, dkx, dky, dkxy })
}

/// `G[i, j] = k(X_i, Y_j)`.
pub fn gram(x: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    check_dim(x.ncols(), y.ncols())?;
    Ok(DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| {
        kernel_from_sq(sq_dist_rows(x, i, y, j), cfg.bandwidth)
    }))
}

/// `G[i, j] = d/d(X_i)_l k(X_i, Y_j)`.
pub fn grad_gram(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: usize,
    cfg: &KernelConfig,
) -> Result<DMatrix<f64>> {
    check_dim(x.ncols(), y.ncols())?;
    if l >= x.ncols() {
        return Err(TksdError::InvalidInput(format!(
            "coordinate {l} out of range for dimension {}",
            x.ncols()
        )));
    }
    let s2 = cfg.bandwidth * cfg.bandwidth;
    Ok(DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| {
        let k = kernel_from_sq(sq_dist_rows(x, i, y, j), cfg.bandwidth);
        -((x[(i, l)] - y[(j, l)]) / s2) * k
    }))
}

/// Cholesky factor of `K + jitter * I`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    chol: Cholesky<f64, Dyn>,
    jitter_used: f64,
    escalations: u32,
}

impl SpdSolver {
    /// Factorise `K + eps I`, escalating `eps` by x10 on failure.
    pub fn factor(k: &DMatrix<f64>, cfg: &KernelConfig) -> Result<Self> {
        if !k.is_square() {
            return Err(TksdError::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        let m = k.nrows();
        let mut jitter = cfg.resolve_jitter(k);
        let mut escalations = 0;
        loop {
            let mut a = k.clone();
            for i in 0..m {
                a[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(a) {
                return Ok(Self {
                    chol,
                    jitter_used: jitter,
                    escalations,
                });
            }
            if escalations >= cfg.jitter_growth_limit {
                return Err(TksdError::NotPositiveDefinite { jitter });
            }
            escalations += 1;
            // A zero starting jitter cannot grow geometrically.
            jitter = if jitter > 0.0 {
                jitter * 10.0
            } else {
                1e-10 * diag_scale(k)
            };
        }
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn escalations(&self) -> u32 {
        self.escalations
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

/// `(K + eps I)^{-1} B` with the jitter actually used.
pub fn regularized_spd_solve(
    k: &DMatrix<f64>,
    b: &DMatrix<f64>,
    cfg: &KernelConfig,
) -> Result<(DMatrix<f64>, f64)> {
    check_dim(k.nrows(), b.nrows())?;
    let solver = SpdSolver::factor(k, cfg)?;
    Ok((solver.solve(b), solver.jitter_used()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    fn cfg(s: f64) -> KernelConfig {
        KernelConfig::new(s).unwrap()
    }

    #[test]
    fn median_small_cases() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        assert_eq!(median_heuristic(&x).unwrap(), 2.0);
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        assert_eq!(median_heuristic(&x).unwrap(), 5.0);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            median_heuristic(&x),
            Err(TksdError::DegenerateData(_))
        ));
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(matches!(
            median_heuristic(&x),
            Err(TksdError::InvalidInput(_))
        ));
    }

    #[test]
    fn median_even_count_uses_midpoint() {
        // distances {1, 3, 4, 2, 3, 1}: sorted 1 1 2 3 3 4, midpoint of 2 and 3
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 3.0, 4.0]);
        assert_eq!(median_heuristic(&x).unwrap(), 2.5);
    }

    #[test]
    fn bundle_identity_and_substitution() {
        let b = kernel_bundle(&[0.3, -1.0], &[0.3, -1.0], &cfg(1.0)).unwrap();
        assert_eq!(b.k, 1.0);
        assert!(b.dkx.iter().all(|v| *v == 0.0));
        assert!(b.dky.iter().all(|v| *v == 0.0));
        assert!(b.dkxy.iter().all(|v| *v == 1.0));

        let e = (-1.0f64).exp();
        let b = kernel_bundle(&[0.0], &[2.0], &cfg(2f64.sqrt())).unwrap();
        assert!(rel_close(b.k, e, 1e-14));
        assert!(rel_close(b.dkx[0], e, 1e-14));
        assert!(rel_close(b.dky[0], -e, 1e-14));
        assert!(rel_close(b.dkxy[0], -e / 2.0, 1e-14));

        let swapped = kernel_bundle(&[2.0], &[0.0], &cfg(2f64.sqrt())).unwrap();
        assert_eq!(swapped.k, b.k);
        assert_eq!(swapped.dkx, b.dky);
        assert_eq!(swapped.dky, b.dkx);
        assert_eq!(swapped.dkxy, b.dkxy);
    }

    #[test]
    fn bundle_dimension_mismatch() {
        assert!(matches!(
            kernel_bundle(&[0.0], &[0.0, 1.0], &cfg(1.0)),
            Err(TksdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_examples() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let y = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let g = gram(&x, &y, &cfg(2f64.sqrt())).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert!(rel_close(g[(0, 1)], (-1.0f64).exp(), 1e-14));

        let pts = DMatrix::from_row_slice(3, 2, &[0.0, 0.1, 1.0, -0.4, 2.0, 0.3]);
        let other = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, -1.0, 0.0]);
        let kxx = gram(&pts, &pts, &cfg(0.7)).unwrap();
        assert!((0..3).all(|i| kxx[(i, i)] == 1.0));
        let a = gram(&pts, &other, &cfg(0.7)).unwrap();
        let b = gram(&other, &pts, &cfg(0.7)).unwrap();
        assert_eq!(a, b.transpose());
    }

    #[test]
    fn grad_gram_matches_bundle() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 1.0, -0.4]);
        let y = DMatrix::from_row_slice(3, 2, &[0.5, 0.5, -1.0, 0.0, 0.2, 0.2]);
        let c = cfg(0.8);
        let g1 = grad_gram(&x, &y, 1, &c).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let xi: Vec<f64> = x.row(i).iter().copied().collect();
                let yj: Vec<f64> = y.row(j).iter().copied().collect();
                let b = kernel_bundle(&xi, &yj, &c).unwrap();
                assert!((g1[(i, j)] - b.dkx[1]).abs() < 1e-15);
            }
        }
        assert!(grad_gram(&x, &y, 2, &c).is_err());
    }

    #[test]
    fn spd_solve_examples() {
        let c = cfg(1.0).with_jitter(Jitter::Absolute(0.0)).unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::from_column_slice(2, 1, &[3.0, 7.0]);
        let (r, eps) = regularized_spd_solve(&id, &b, &c).unwrap();
        assert_eq!(eps, 0.0);
        assert_eq!(r, b);

        let k = DMatrix::from_diagonal_element(2, 2, 2.0);
        let b = DMatrix::from_column_slice(2, 1, &[2.0, 4.0]);
        let (r, _) = regularized_spd_solve(&k, &b, &c).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn spd_solve_singular_matches_elimination() {
        // Oracle: Cramer's rule on [[1+e, 1], [1, 1+e]] x = (1, 1).
        let eps = 1e-6;
        let c = cfg(1.0).with_jitter(Jitter::Absolute(eps)).unwrap();
        let k = DMatrix::from_element(2, 2, 1.0);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let (r, used) = regularized_spd_solve(&k, &b, &c).unwrap();
        assert_eq!(used, eps);
        let (a11, a12, a22) = (1.0 + eps, 1.0, 1.0 + eps);
        let det = a11 * a22 - a12 * a12;
        let x1 = (1.0 * a22 - a12 * 1.0) / det;
        let x2 = (a11 * 1.0 - a12 * 1.0) / det;
        assert!(rel_close(r[0], x1, 1e-8));
        assert!(rel_close(r[1], x2, 1e-8));
    }

    #[test]
    fn jitter_escalates_then_fails() {
        let k = DMatrix::from_element(3, 3, 1.0);
        let c = cfg(1.0).with_jitter(Jitter::Absolute(0.0)).unwrap();
        let s = SpdSolver::factor(&k, &c).unwrap();
        assert!(s.escalations() >= 1);
        assert!(s.jitter_used() > 0.0);

        let neg = DMatrix::from_diagonal_element(2, 2, -1.0);
        assert!(matches!(
            SpdSolver::factor(&neg, &c),
            Err(TksdError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn default_jitter_is_scale_relative() {
        let k = DMatrix::from_diagonal_element(4, 4, 3.0);
        let s = SpdSolver::factor(&k, &cfg(1.0)).unwrap();
        assert!(rel_close(s.jitter_used(), 3e-8, 1e-12));
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::new(0.0).is_err());
        assert!(KernelConfig::new(f64::NAN).is_err());
        assert!(cfg(1.0).with_jitter(Jitter::Absolute(-1.0)).is_err());
    }

    #[test]
    fn bundle_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let d = 3;
            let sigma = rng.random_range(0.3..2.0);
            let c = cfg(sigma);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = kernel_bundle(&x, &y, &c).unwrap();
            let h = 1e-5 * sigma;
            for l in 0..d {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[l] += h;
                xm[l] -= h;
                let fd = (kernel_value(&xp, &y, &c).unwrap() - kernel_value(&xm, &y, &c).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - b.dkx[l]).abs() <= 1e-5 * fd.abs().max(1e-6),
                    "{fd} {}",
                    b.dkx[l]
                );
                let fd2 = (kernel_bundle(&xp, &y, &c).unwrap().dky[l]
                    - kernel_bundle(&xm, &y, &c).unwrap().dky[l])
                    / (2.0 * h);
                assert!(
                    (fd2 - b.dkxy[l]).abs() <= 1e-5 * fd2.abs().max(1e-6),
                    "{fd2} {}",
                    b.dkxy[l]
                );
                assert_eq!(b.dky[l], -b.dkx[l]);
            }
            assert!(b.k > 0.0 && b.k <= 1.0);
        }
    }

    #[test]
    fn solve_residual_is_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-2.0..2.0));
        let c = cfg(0.9);
        let k = gram(&pts, &pts, &c).unwrap();
        let b = DMatrix::from_fn(30, 3, |_, _| rng.random_range(-1.0..1.0));
        let solver = SpdSolver::factor(&k, &c).unwrap();
        assert_eq!(solver.escalations(), 0);
        let eps = solver.jitter_used();
        let r = solver.solve(&b);
        let mut reg = k.clone();
        for i in 0..30 {
            reg[(i, i)] += eps;
        }
        let resid = (&reg * &r - &b).norm();
        assert!(resid <= 1e-8 * (k.norm() + eps) * r.norm(), "{resid}");
    }

    proptest::proptest! {
        #[test]
        fn gram_plus_jitter_is_positive_definite(
            raw in proptest::collection::vec(-3.0f64..3.0, 2..40),
            sigma in 0.1f64..3.0,
            eps in 1e-6f64..1e-2,
        ) {
            let n = raw.len() / 2;
            let pts = DMatrix::from_row_slice(n, 2, &raw[..2 * n]);
            let c = cfg(sigma).with_jitter(Jitter::Absolute(eps)).unwrap().with_growth_limit(0);
            let k = gram(&pts, &pts, &c).unwrap();
            proptest::prop_assert!(SpdSolver::factor(&k, &c).is_ok());
        }
    }
}
