use nalgebra::DMatrix;

use super::domain::{BoundarySample, LpNorm};
use crate::error::{check_dim, Result, TksdError};

/// `min_j |x - x'_j|_alpha^gamma` and its gradient at the attaining point.
///
/// Ties go to the lowest boundary index. Where the norm is not
/// differentiable (coincident points, or a zero coordinate under l1) the
/// corresponding gradient entries are 0.
pub fn approx_distance(
    x: &[f64],
    boundary: &BoundarySample,
    alpha: LpNorm,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    check_dim(boundary.dim(), x.len())?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(TksdError::InvalidInput(format!(
            "distance power must be positive, got {gamma}"
        )));
    }
    let pts = boundary.points();
    let d = x.len();
    let mut best = f64::INFINITY;
    let mut best_j = 0;
    let mut diff = vec![0.0; d];
    for j in 0..pts.nrows() {
        for l in 0..d {
            diff[l] = x[l] - pts[(j, l)];
        }
        let r = alpha.norm(&diff);
        if r < best {
            best = r;
            best_j = j;
        }
    }
    for l in 0..d {
        diff[l] = x[l] - pts[(best_j, l)];
    }
    let value = best.powf(gamma);
    let mut grad = vec![0.0; d];
    if best > 0.0 {
        let outer = gamma * best.powf(gamma - 1.0);
        for l in 0..d {
            grad[l] = match alpha {
                LpNorm::L2 => outer * diff[l] / best,
                LpNorm::L1 => {
                    if diff[l] == 0.0 {
                        0.0
                    } else {
                        outer * diff[l].signum()
                    }
                }
            };
        }
    }
    Ok((value, grad))
}

/// [`approx_distance`] for every row of `x`; gradients are returned row-wise.
pub fn approx_distance_rows(
    x: &DMatrix<f64>,
    boundary: &BoundarySample,
    alpha: LpNorm,
    gamma: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    let mut values = Vec::with_capacity(n);
    let mut grads = DMatrix::zeros(n, x.ncols());
    for i in 0..n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let (v, g) = approx_distance(&row, boundary, alpha, gamma)?;
        values.push(v);
        grads.row_mut(i).copy_from_slice(&g);
    }
    Ok((values, grads))
}

/// Euclidean distance from an interior point to the sphere `|x - c|_2 = r`.
pub fn exact_distance_l2ball(x: &[f64], radius: f64, center: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim(center.len(), x.len())?;
    let diff: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        return Err(TksdError::InvalidInput(format!(
            "point lies outside the ball (|x - c| = {norm}, r = {radius})"
        )));
    }
    let grad = if norm > 0.0 {
        diff.iter().map(|v| -v / norm).collect()
    } else {
        vec![0.0; x.len()]
    };
    Ok((radius - norm, grad))
}

pub fn exact_distance_l2ball_rows(
    x: &DMatrix<f64>,
    radius: f64,
    center: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    let mut values = Vec::with_capacity(n);
    let mut grads = DMatrix::zeros(n, x.ncols());
    for i in 0..n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let (v, g) = exact_distance_l2ball(&row, radius, center)?;
        values.push(v);
        grads.row_mut(i).copy_from_slice(&g);
    }
    Ok((values, grads))
}

/// Volume of the unit Euclidean ball in `R^d`, `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: u32) -> f64 {
    // V_d = 2 pi / d * V_{d-2}, V_0 = 1, V_1 = 2
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Smallest radius `eps` such that `m` uniform boundary samples on a surface
/// of area `area` in `R^d` are `eps`-dense with probability 0.95.
pub fn epsilon_lower_bound(m: u64, d: u32, area: f64) -> Result<f64> {
    if m == 0 || d == 0 || !(area.is_finite() && area > 0.0) {
        return Err(TksdError::InvalidInput(format!(
            "need m >= 1, d >= 1 and positive area (got m={m}, d={d}, area={area})"
        )));
    }
    // 1 - 0.05^{1/m} without cancellation for large m
    let tail = -(0.05f64.ln() / m as f64).exp_m1();
    Ok((area / unit_ball_volume(d) * tail).powf(1.0 / d as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_boundary_lp, LpBall};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(rows: &[f64], d: usize) -> BoundarySample {
        BoundarySample::new(DMatrix::from_row_slice(rows.len() / d, d, rows), None).unwrap()
    }

    #[test]
    fn approx_examples() {
        let circle = sample(&[1.0, 0.0, 0.0, 1.0, -0.6, 0.8], 2);
        let (v, _) = approx_distance(&[0.0, 0.0], &circle, LpNorm::L2, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        let single = sample(&[1.0, 0.0], 2);
        let (v, g) = approx_distance(&[0.0, 0.0], &single, LpNorm::L1, 1.0).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![-1.0, 0.0]);

        let (v, g) = approx_distance(&[1.0, 0.0], &single, LpNorm::L2, 0.5).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        assert!(approx_distance(&[0.0, 0.0], &single, LpNorm::L2, 0.0).is_err());
    }

    #[test]
    fn approx_ties_use_lowest_index() {
        let b = sample(&[1.0, 0.0, -1.0, 0.0], 2);
        let (_, g) = approx_distance(&[0.0, 0.0], &b, LpNorm::L2, 1.0).unwrap();
        assert_eq!(g, vec![-1.0, 0.0]);
    }

    #[test]
    fn approx_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..40 {
            let d = 3;
            let rows: Vec<f64> = (0..15 * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = sample(&rows, d);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let alpha = if trial % 2 == 0 {
                LpNorm::L2
            } else {
                LpNorm::L1
            };
            let gamma = [1.0, 2.0, 1.5][trial % 3];
            let (_, g) = approx_distance(&x, &b, alpha, gamma).unwrap();
            let h = 1e-6;
            for l in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[l] += h;
                xm[l] -= h;
                let fp = approx_distance(&xp, &b, alpha, gamma).unwrap().0;
                let fm = approx_distance(&xm, &b, alpha, gamma).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - g[l]).abs() < 1e-5,
                    "trial {trial} l {l}: {fd} vs {}",
                    g[l]
                );
            }
        }
    }

    #[test]
    fn exact_ball_examples() {
        let (v, g) = exact_distance_l2ball(&[0.0, 0.0], 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (v, g) = exact_distance_l2ball(&[1.0, 0.0], 2.0, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![-1.0, 0.0]);
        assert!(exact_distance_l2ball(&[3.0, 0.0], 2.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn exact_ball_agrees_with_dense_boundary() {
        let ball = LpBall::centered(LpNorm::L2, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dense = sample_boundary_lp(&ball, 100_000, None, &mut rng).unwrap();
        for _ in 0..10 {
            let x = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
            let (exact, _) = exact_distance_l2ball(&x, 1.0, &[0.0, 0.0]).unwrap();
            let (approx, _) = approx_distance(&x, &dense, LpNorm::L2, 1.0).unwrap();
            assert!((exact - approx).abs() < 1e-2);
        }
    }

    #[test]
    fn approx_gap_shrinks_with_m() {
        // Expected gap over 32 seeds at increasing m.
        let ball = LpBall::centered(LpNorm::L2, 1.0, 2).unwrap();
        let x = [0.3, -0.2];
        let exact = exact_distance_l2ball(&x, 1.0, &[0.0, 0.0]).unwrap().0;
        let mut prev = f64::INFINITY;
        for m in [10, 100, 1000, 100_000] {
            let mut gap = 0.0;
            for seed in 0..32 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let b = sample_boundary_lp(&ball, m, None, &mut rng).unwrap();
                gap += approx_distance(&x, &b, LpNorm::L2, 1.0).unwrap().0 - exact;
            }
            gap /= 32.0;
            assert!(gap >= 0.0 && gap <= prev, "m={m}: gap {gap} prev {prev}");
            prev = gap;
        }
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - pi).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - pi * pi / 2.0).abs() < 1e-14);
    }

    #[test]
    fn epsilon_bound_examples() {
        let pi = std::f64::consts::PI;
        let v = epsilon_lower_bound(1, 2, pi).unwrap();
        assert!((v - 0.95f64.sqrt()).abs() < 1e-12);
        assert!(epsilon_lower_bound(1_000_000_000, 2, pi).unwrap() < 1e-3);
        assert!(epsilon_lower_bound(0, 2, pi).is_err());
        assert!(epsilon_lower_bound(1, 2, 0.0).is_err());
        let a = epsilon_lower_bound(10, 3, 1.0).unwrap();
        let b = epsilon_lower_bound(10, 3, 4.0).unwrap();
        assert!(b > a);
    }
}
