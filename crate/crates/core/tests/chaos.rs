use std::f64::consts::PI;

use nalgebra::DMatrix;
use zonalchaos::chaos::{
    coefficient_mc, det_coefficient, det_coefficient_rational, det_coefficient_sigma, radial_coefficient_integral,
    sqrt_det, truncation_errors, variance_expansion, ChaosExpansion, Route,
};
use zonalchaos::geometry::determinant_mean_mc;
use zonalchaos::linalg::sym_inv_sqrt;
use zonalchaos::matpoly::{c_kappa, HermitePoly, MatPolyContext};
use zonalchaos::partitions::multivariate_gamma;
use zonalchaos::sampling::{monte_carlo, sample_gaussian_matrix, standard_gaussian, MatrixEnsemble, RngStream};
use zonalchaos::stats::Estimate;
use zonalchaos::Partition;

fn ok(est: Estimate, target: f64) -> bool {
    (est.value - target).abs() <= 4.0 * est.std_error
}

// E det(X X^T) = n (n-1) ... (n-l+1)
fn second_moment(ell: usize, n: usize) -> f64 {
    (0..ell).map(|i| (n - i) as f64).product()
}

#[test]
fn mean_coefficients() {
    assert!((det_coefficient(&Partition::empty(), 1, 1).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-14);
    assert!((det_coefficient(&Partition::empty(), 2, 3).unwrap() - 2.0).abs() < 1e-13);
    for ell in 1..=3 {
        let want = 2f64.powf(ell as f64 / 2.0) * multivariate_gamma(2.0, ell).unwrap()
            / multivariate_gamma(1.5, ell).unwrap();
        assert!((det_coefficient(&Partition::row(1), ell, 3).unwrap() - want).abs() < 1e-12 * want);
    }
}

#[test]
fn first_coefficient_equals_mean() {
    for n in 1..=7 {
        for ell in 1..=n.min(4) {
            let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
            assert_eq!(
                det_coefficient_rational(&Partition::row(1), &ctx).unwrap(),
                det_coefficient_rational(&Partition::empty(), &ctx).unwrap(),
                "l = {ell}, n = {n}"
            );
        }
    }
}

#[test]
fn monte_carlo_matches_closed_form() {
    let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
    for kappa in [Partition::empty(), Partition::row(1), Partition::row(2), Partition::new(vec![1, 1]).unwrap()] {
        let rec = coefficient_mc(sqrt_det, &kappa, &ctx, 400_000, RngStream::new(10, 0)).unwrap();
        assert_eq!(rec.route, Route::MonteCarlo);
        assert!(rec.std_error.unwrap() > 0.0);
        let closed = det_coefficient(&kappa, 2, 3).unwrap();
        assert!(ok(rec.estimate(), closed), "({kappa}): {:?} vs {closed}", rec.estimate());
    }
    let one = coefficient_mc(|_| 1.0, &Partition::row(1), &ctx, 100_000, RngStream::new(11, 0)).unwrap();
    assert!(ok(one.estimate(), 0.0), "{:?}", one.estimate());
    let h1 = HermitePoly::new(&Partition::row(1), &ctx).unwrap();
    let selfp = coefficient_mc(|e| h1.eval_gram_eigenvalues(e), &Partition::row(1), &ctx, 100_000, RngStream::new(12, 0))
        .unwrap();
    assert!(ok(selfp.estimate(), 1.0), "{:?}", selfp.estimate());
}

#[test]
fn odd_chaos_projection_vanishes() {
    let acc = monte_carlo(RngStream::new(13, 0), 1_000_000, 2, |rng, out| {
        let x = standard_gaussian(2, 3, rng);
        let f = sqrt_det(&zonalchaos::linalg::gram_eigenvalues(&x));
        out[0] = f * x[(0, 0)];
        out[1] = f * x[(0, 0)] * x[(0, 1)] * x[(1, 2)];
    });
    assert!(ok(acc[0].estimate(), 0.0), "{:?}", acc[0].estimate());
    assert!(ok(acc[1].estimate(), 0.0), "{:?}", acc[1].estimate());
}

#[test]
fn variance_expansion_for_chi_three() {
    let exp = ChaosExpansion::determinant(1, 3, 6).unwrap();
    let sums = variance_expansion(&exp, 6).unwrap();
    assert!((sums[0] - 8.0 / (6.0 * PI)).abs() < 1e-12);
    let var = 3.0 - 8.0 / PI;
    assert!(sums.windows(2).all(|w| w[0] <= w[1]));
    assert!(sums.iter().all(|s| *s <= var));
    assert!(var - sums[5] < 2e-3, "{}", var - sums[5]);
    assert!(variance_expansion(&exp, 7).is_err());

    // (F - E F)^2 with the exact mean has expectation Var F
    let mu = (8.0 / PI).sqrt();
    let acc = monte_carlo(RngStream::new(14, 0), 200_000, 1, |rng, out| {
        let f = sqrt_det(&zonalchaos::linalg::gram_eigenvalues(&standard_gaussian(1, 3, rng)));
        out[0] = (f - mu) * (f - mu);
    });
    let var_mc = acc[0].estimate();
    assert!(ok(var_mc, var));
    for s in &sums {
        assert!(*s <= var_mc.value + 4.0 * var_mc.std_error);
    }
}

#[test]
fn variance_expansion_increases_with_dimension_two() {
    let exp = ChaosExpansion::determinant(2, 3, 4).unwrap();
    let sums = variance_expansion(&exp, 4).unwrap();
    let mean = det_coefficient(&Partition::empty(), 2, 3).unwrap();
    let var = second_moment(2, 3) - mean * mean;
    assert!(sums.windows(2).all(|w| w[0] <= w[1]));
    assert!(*sums.last().unwrap() <= var);
}

#[test]
fn truncation_error_decreases() {
    let exp = ChaosExpansion::determinant(1, 3, 3).unwrap();
    let errs = truncation_errors(sqrt_det, &exp, 400_000, RngStream::new(15, 0)).unwrap();
    let sums = variance_expansion(&exp, 3).unwrap();
    let var = 3.0 - 8.0 / PI;
    for k in 0..errs.len() {
        // exact tail: Var F - S_K
        let tail = var - if k == 0 { 0.0 } else { sums[k - 1] };
        assert!(ok(errs[k], tail), "K = {k}: {:?} vs {tail}", errs[k]);
        if k > 0 {
            assert!(errs[k].value <= errs[k - 1].value + 4.0 * errs[k].std_error);
        }
    }
    assert!(errs[3].value < 0.02, "{:?}", errs[3]);
}

#[test]
fn radial_route() {
    let ctx13 = MatPolyContext::shared(1, 3, 6).unwrap();
    let one = radial_coefficient_integral(|_| 1.0, &Partition::empty(), &ctx13, 10_000, RngStream::new(16, 0)).unwrap();
    assert!((one.value - 1.0).abs() < 1e-12);
    let rec = radial_coefficient_integral(|e| e[0].sqrt(), &Partition::empty(), &ctx13, 400_000, RngStream::new(17, 0))
        .unwrap();
    assert_eq!(rec.route, Route::RadialIntegral);
    assert!(ok(rec.estimate(), (8.0 / PI).sqrt()), "{:?}", rec.estimate());

    // trace: t_1 = l n + 2 n H_(1)
    let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
    let trace = |e: &[f64]| e.iter().sum::<f64>();
    let radial = radial_coefficient_integral(trace, &Partition::row(1), &ctx, 400_000, RngStream::new(18, 0)).unwrap();
    let mc = coefficient_mc(trace, &Partition::row(1), &ctx, 400_000, RngStream::new(19, 0)).unwrap();
    let diff = radial.value - mc.value;
    let se = radial.std_error.unwrap().hypot(mc.std_error.unwrap());
    assert!(diff.abs() <= 4.0 * se, "{radial:?} vs {mc:?}");
    assert!(ok(radial.estimate(), 6.0) && ok(mc.estimate(), 6.0));

    let radial_det =
        radial_coefficient_integral(|e| sqrt_det(e), &Partition::row(2), &ctx, 400_000, RngStream::new(20, 0)).unwrap();
    let closed = det_coefficient(&Partition::row(2), 2, 3).unwrap();
    assert!(ok(radial_det.estimate(), closed), "{radial_det:?} vs {closed}");
}

#[test]
fn covariance_coefficients() {
    let kappa = Partition::row(1);
    // Sigma = Id: the Stiefel integrand is constant
    let id = det_coefficient_sigma(&kappa, 2, 3, &DMatrix::identity(3, 3), 1000, RngStream::new(21, 0)).unwrap();
    assert!((id.value - det_coefficient(&kappa, 2, 3).unwrap()).abs() < 1e-12);

    // Sigma = c Id: X = c^{1/2} Z gives F^(kappa; c Id) = c^{l/2 - n l k} F^(kappa)
    let (ell, n, c) = (1usize, 2usize, 2.0f64);
    for kappa in [Partition::empty(), Partition::row(1), Partition::row(2)] {
        let k = kappa.weight() as f64;
        let got = det_coefficient_sigma(&kappa, ell, n, &(DMatrix::identity(n, n) * c), 1000, RngStream::new(22, 0))
            .unwrap();
        let want = c.powf(ell as f64 / 2.0 - (n * ell) as f64 * k) * det_coefficient(&kappa, ell, n).unwrap();
        assert!((got.value - want).abs() < 1e-10 * want.abs(), "({kappa}): {} vs {want}", got.value);
    }

    let sigma = DMatrix::from_row_slice(3, 3, &[1.5, 0.4, 0.0, 0.4, 1.0, -0.3, 0.0, -0.3, 0.8]);
    let mean = det_coefficient_sigma(&Partition::empty(), 2, 3, &sigma, 200_000, RngStream::new(23, 0)).unwrap();
    let direct = determinant_mean_mc(&sigma, 2, 200_000, RngStream::new(24, 0)).unwrap();
    let se = mean.std_error.unwrap().hypot(direct.std_error);
    assert!((mean.value - direct.value).abs() <= 4.0 * se, "{mean:?} vs {direct:?}");

    // direct projection E[F H_(1)(X; Sigma)] / c((1); Sigma)
    let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
    let h1 = HermitePoly::new(&Partition::row(1), &ctx).unwrap();
    let det = sigma.determinant();
    let whiten = sym_inv_sqrt(&sigma);
    let ens = MatrixEnsemble::with_sigma(2, 3, sigma.clone()).unwrap();
    let acc = monte_carlo(RngStream::new(25, 0), 400_000, 1, |rng, out| {
        let x = sample_gaussian_matrix(&ens, rng);
        let f = sqrt_det(&zonalchaos::linalg::gram_eigenvalues(&x));
        out[0] = f * det.powi(2) * h1.eval(&(&x * &whiten)).unwrap();
    });
    let projected = acc[0].estimate().scale(1.0 / (det.powi(4) * c_kappa(&Partition::row(1), &ctx)));
    let formula = det_coefficient_sigma(&Partition::row(1), 2, 3, &sigma, 200_000, RngStream::new(26, 0)).unwrap();
    let se = projected.std_error.hypot(formula.std_error.unwrap());
    assert!((projected.value - formula.value).abs() <= 4.0 * se, "{projected:?} vs {formula:?}");
}

#[test]
fn closed_form_records_carry_no_error() {
    let exp = ChaosExpansion::determinant(2, 3, 2).unwrap();
    assert!(exp.coefficients.iter().all(|c| c.route == Route::ClosedForm && c.std_error.is_none()));
    assert!(exp.coefficients.iter().all(|c| c.kappa.len() <= 2));
    assert!(det_coefficient(&Partition::row(1), 3, 2).is_err());
    assert!(det_coefficient(&Partition::new(vec![1, 1, 1]).unwrap(), 2, 3).is_err());
}
