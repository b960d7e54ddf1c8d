use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tksd::estimators::{
    bdksd_vstat, fit_tksd, fit_truncsm, minimize, tksd_ustat, tksd_vstat, truncsm_value_and_grad,
    DistanceProvider, OptimConfig, TksdWorkspace,
};
use tksd::geometry::{
    sample_boundary_lp, truncated_rejection_sample, BoundarySample, Domain, GaussianSampler,
    LpBall, LpNorm,
};
use tksd::kernel::KernelConfig;
use tksd::models::GaussianMeanModel;

fn points(n: usize, d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2.0..2.0f64, n * d)
        .prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
}

fn unit_disc_data(mu: &[f64], n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = GaussianSampler::isotropic(DVector::from_column_slice(mu), 1.0).unwrap();
    let ball = LpBall::centered(LpNorm::L2, 1.0, mu.len()).unwrap();
    truncated_rejection_sample(
        |r: &mut ChaCha8Rng| base.sample(r),
        &Domain::from(ball),
        n,
        &mut rng,
    )
    .unwrap()
    .points
}

fn disc_boundary(m: usize, seed: u64) -> BoundarySample {
    let ball = LpBall::centered(LpNorm::L2, 1.0, 2).unwrap();
    sample_boundary_lp(&ball, m, None, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn vstat_is_non_negative(x in points(12, 2), b in points(5, 2), theta in proptest::collection::vec(-2.0..2.0f64, 2)) {
        let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
        let cfg = KernelConfig::new(0.8).unwrap();
        let boundary = BoundarySample::new(b, None).unwrap();
        let v = tksd_vstat(&model, &x, &boundary, &cfg, &theta).unwrap();
        prop_assert!(v >= -1e-10, "{v}");
    }

    #[test]
    fn vstat_ignores_row_order(x in points(10, 2), b in points(4, 2), shift in 1usize..10) {
        let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
        let cfg = KernelConfig::new(1.0).unwrap();
        let rotate = |m: &DMatrix<f64>, k: usize| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[((i + k) % m.nrows(), j)]);
        let v1 = tksd_vstat(&model, &x, &BoundarySample::new(b.clone(), None).unwrap(), &cfg, &[0.1, 0.2]).unwrap();
        let v2 = tksd_vstat(&model, &rotate(&x, shift), &BoundarySample::new(rotate(&b, shift % 4), None).unwrap(), &cfg, &[0.1, 0.2]).unwrap();
        prop_assert!((v1 - v2).abs() <= 1e-10 * (1.0 + v1.abs()));
    }

    #[test]
    fn pair_kernel_symmetric_and_matches_stats(x in points(9, 2), b in points(3, 2)) {
        let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
        let cfg = KernelConfig::new(0.7).unwrap();
        let boundary = BoundarySample::new(b, None).unwrap();
        let ws = TksdWorkspace::new(&x, &boundary, &cfg).unwrap();
        let h = ws.pair_kernel(&model, &[0.0, 0.3]).unwrap();
        prop_assert!((&h - h.transpose()).amax() < 1e-10);
        let n = 9.0;
        let v = h.sum() / (n * n);
        let u = (h.sum() - h.trace()) / (n * (n - 1.0));
        prop_assert!((v - ws.vstat(&model, &[0.0, 0.3]).unwrap()).abs() < 1e-10);
        prop_assert!((u - ws.ustat(&model, &[0.0, 0.3]).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn zero_weight_bdksd_vanishes(x in points(8, 2), theta in proptest::collection::vec(-2.0..2.0f64, 2)) {
        let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
        let cfg = KernelConfig::new(1.0).unwrap();
        let v = bdksd_vstat(&model, &x, &[0.0; 8], &DMatrix::zeros(8, 2), &cfg, &theta).unwrap();
        prop_assert_eq!(v, 0.0);
    }

    #[test]
    fn unit_weight_truncsm_minimiser_is_mean(x in points(15, 3)) {
        let model = GaussianMeanModel::isotropic(3, 1.0).unwrap();
        let ones = vec![1.0; 15];
        let zeros = DMatrix::zeros(15, 3);
        let out = minimize(|t| truncsm_value_and_grad(&model, &x, &ones, &zeros, t.as_slice()), 3, true, &OptimConfig::default()).unwrap();
        for l in 0..3 {
            prop_assert!((out.theta[l] - x.column(l).mean()).abs() < 1e-8);
        }
    }
}

#[test]
fn objective_lower_at_truth_than_shifted() {
    let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
    let (mut below, trials) = (0, 20);
    for seed in 0..trials {
        let x = unit_disc_data(&[0.5, 0.5], 200, seed);
        let b = disc_boundary(8, 1000 + seed);
        let cfg = KernelConfig::from_data(&x).unwrap();
        let ws = TksdWorkspace::new(&x, &b, &cfg).unwrap();
        if ws.vstat(&model, &[0.5, 0.5]).unwrap() < ws.vstat(&model, &[1.5, 1.5]).unwrap() {
            below += 1;
        }
    }
    assert_eq!(below, trials);
}

#[test]
fn u_and_v_converge_as_n_grows() {
    let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
    let gap = |n: usize| {
        (0..10)
            .map(|seed| {
                let x = unit_disc_data(&[0.5, 0.5], n, seed);
                let b = disc_boundary(8, 50 + seed);
                let cfg = KernelConfig::from_data(&x).unwrap();
                let th = [0.5, 0.5];
                (tksd_ustat(&model, &x, &b, &cfg, &th).unwrap()
                    - tksd_vstat(&model, &x, &b, &cfg, &th).unwrap())
                .abs()
            })
            .sum::<f64>()
    };
    assert!(gap(400) < gap(50));
}

#[test]
fn more_data_lowers_error() {
    let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
    let mean_err = |n: usize| {
        (0..16)
            .map(|seed| {
                let x = unit_disc_data(&[0.5, 0.5], n, seed);
                let b = disc_boundary(16, 77 + seed);
                let cfg = KernelConfig::from_data(&x).unwrap();
                let fit = fit_tksd(&model, &x, &b, &cfg, &OptimConfig::default()).unwrap();
                (fit.theta_hat - DVector::from_vec(vec![0.5, 0.5])).norm()
            })
            .sum::<f64>()
            / 16.0
    };
    assert!(mean_err(300) < mean_err(50));
}

#[test]
fn symmetric_setup_is_roughly_unbiased() {
    let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
    let mut avg = DVector::zeros(2);
    for seed in 0..24 {
        let x = unit_disc_data(&[0.0, 0.0], 300, seed);
        let b = disc_boundary(16, 300 + seed);
        let cfg = KernelConfig::from_data(&x).unwrap();
        avg += fit_tksd(&model, &x, &b, &cfg, &OptimConfig::default())
            .unwrap()
            .theta_hat;
    }
    avg /= 24.0;
    assert!(avg.amax() < 0.1, "{avg}");
}

#[test]
fn approximate_truncsm_improves_with_boundary_points() {
    let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
    let exact = DistanceProvider::ExactL2Ball {
        radius: 1.0,
        center: vec![0.0, 0.0],
    };
    let err = |dist: &DistanceProvider, x: &DMatrix<f64>| {
        let fit = fit_truncsm(&model, x, dist, &OptimConfig::default()).unwrap();
        (fit.theta_hat - DVector::from_vec(vec![0.5, 0.5])).norm()
    };
    let (mut few, mut many, mut ex) = (0.0, 0.0, 0.0);
    for seed in 0..16 {
        let x = unit_disc_data(&[0.5, 0.5], 300, seed);
        let approx = |m| DistanceProvider::Approx {
            boundary: disc_boundary(m, 900 + seed),
            alpha: LpNorm::L2,
            gamma: 1.0,
        };
        few += err(&approx(8), &x);
        many += err(&approx(512), &x);
        ex += err(&exact, &x);
    }
    assert!(many < few, "{many} vs {few}");
    assert!(ex < few, "{ex} vs {few}");
}

#[test]
fn reconstructed_witness_settles_with_more_boundary_points() {
    let model = GaussianMeanModel::isotropic(2, 1.0).unwrap();
    let x = unit_disc_data(&[0.5, 0.5], 200, 5);
    let cfg = KernelConfig::from_data(&x).unwrap();
    let query = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.3, -0.2, -0.4, 0.1]);
    let witness = |m: usize| {
        let ws = TksdWorkspace::new(&x, &disc_boundary(m, 11), &cfg).unwrap();
        ws.reconstruct_g(&model, &[0.2, 0.2], &query, true).unwrap()
    };
    let (g16, g64, g256) = (witness(16), witness(64), witness(256));
    assert!((&g256 - &g64).norm() < (&g64 - &g16).norm() + 1e-12);
}
