use nalgebra::DMatrix;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonalchaos::linalg::{gram_eigenvalues, sym_inv_sqrt};
use zonalchaos::matpoly::{
    c_kappa, hermite_1d, hermite_eval, hermite_eval_sigma, hermite_univariate_expansion, normalization, HermitePoly,
    MatPolyContext,
};
use zonalchaos::partitions::{enumerate_partitions, gen_pochhammer_f64, rising_factorial_f64, to_f64};
use zonalchaos::sampling::{monte_carlo, sample_gaussian_matrix, sample_orthogonal, standard_gaussian, MatrixEnsemble, RngStream};
use zonalchaos::zonal::ZonalTable;
use zonalchaos::Partition;

fn up_to_weight(k: usize) -> Vec<Partition> {
    (0..=k).flat_map(|w| enumerate_partitions(w, w.max(1))).collect()
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

// H_kappa(X) = k! C_kappa(Id_l) sum_s sum_{sigma |- s} sum_{tau |- k-s}
//   a^kappa_{tau,sigma} / ((-2)^{k+s} (k-s)!) C_sigma(X X^T) / (s! (n/2)_sigma C_sigma(Id_l))
fn double_sum_oracle(kappa: &Partition, x: &DMatrix<f64>, table: &ZonalTable) -> f64 {
    let (ell, n) = (x.nrows(), x.ncols());
    let k = kappa.weight();
    let eig = gram_eigenvalues(x);
    let id_kappa = to_f64(&table.identity_value(kappa, ell).unwrap());
    if id_kappa == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for s in 0..=k {
        for sigma in enumerate_partitions(s, ell) {
            let id_sigma = to_f64(&table.identity_value(&sigma, ell).unwrap());
            let poch = gen_pochhammer_f64(n as f64 / 2.0, &sigma, ell).unwrap();
            let c_sigma = table.eval(&sigma, &eig).unwrap();
            for tau in enumerate_partitions(k - s, k - s) {
                let a = if tau.is_empty() || sigma.is_empty() {
                    if (if tau.is_empty() { &sigma } else { &tau }) == kappa { 1.0 } else { 0.0 }
                } else {
                    table.linearization(&tau, &sigma).unwrap().get(kappa).map(to_f64).unwrap_or(0.0)
                };
                if a == 0.0 {
                    continue;
                }
                acc += a / ((-2f64).powi((k + s) as i32) * fact(k - s)) * c_sigma / (fact(s) * poch * id_sigma);
            }
        }
    }
    fact(k) * id_kappa * acc
}

#[test]
fn laguerre_route_matches_double_sum() {
    let table = ZonalTable::shared(6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (ell, n) in [(1, 1), (1, 3), (2, 2), (2, 3), (3, 4)] {
        let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
        for _ in 0..4 {
            let x = standard_gaussian(ell, n, &mut rng);
            for kappa in up_to_weight(3) {
                let got = hermite_eval(&kappa, &x, &ctx).unwrap();
                let want = double_sum_oracle(&kappa, &x, &table);
                assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "l={ell} n={n} ({kappa}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn scalar_case_is_classical_hermite() {
    // l = n = 1: H_(k)(x) = He_{2k}(x) / (4^k (1/2)_k)
    let ctx = MatPolyContext::shared(1, 1, 6).unwrap();
    for k in 1..=5u32 {
        let scale = 4f64.powi(k as i32) * rising_factorial_f64(0.5, k);
        for x in [-1.7, -0.2, 0.4, 2.3] {
            let got = hermite_eval(&Partition::row(k), &DMatrix::from_element(1, 1, x), &ctx).unwrap();
            let want = hermite_1d(2 * k as usize, x) / scale;
            assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "k = {k}, x = {x}: {got} vs {want}");
        }
    }
}

#[test]
fn entrywise_expansions_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (ell, n) in [(1, 2), (2, 3), (3, 3)] {
        let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
        for _ in 0..5 {
            let x = standard_gaussian(ell, n, &mut rng);
            for kappa in [Partition::row(1), Partition::row(2), Partition::new(vec![1, 1]).unwrap()] {
                let a = hermite_eval(&kappa, &x, &ctx).unwrap();
                let b = hermite_univariate_expansion(&kappa, &x).unwrap();
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "l={ell} n={n} ({kappa}): {a} vs {b}");
            }
        }
    }
}

#[test]
fn normalization_constants() {
    for (ell, n) in [(1, 1), (1, 4), (2, 3), (3, 5)] {
        let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
        assert!((c_kappa(&Partition::row(1), &ctx) - ell as f64 / (2.0 * n as f64)).abs() < 1e-15);
        for kappa in up_to_weight(4) {
            let norm = normalization(&kappa, &ctx);
            if kappa.len() <= ell {
                assert!(norm.c_kappa.is_positive(), "({kappa})");
                assert_eq!(norm.gamma_kappa.is_negative(), kappa.weight() % 2 == 1);
            } else {
                assert!(norm.c_kappa.is_zero() && norm.gamma_kappa.is_zero());
            }
        }
    }
}

fn orthogonality(ell: usize, n: usize, samples: usize, seed: u64) {
    let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
    let kappas = up_to_weight(2);
    let polys: Vec<HermitePoly> = kappas.iter().map(|k| HermitePoly::new(k, &ctx).unwrap()).collect();
    let m = kappas.len();
    let acc = monte_carlo(RngStream::new(seed, 0), samples, m * m + m, |rng, out| {
        let x = standard_gaussian(ell, n, rng);
        let eig = gram_eigenvalues(&x);
        let h: Vec<f64> = polys.iter().map(|p| p.eval_gram_eigenvalues(&eig)).collect();
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = h[i] * h[j];
            }
            out[m * m + i] = h[i];
        }
    });
    for i in 0..m {
        for j in 0..m {
            let target = if i == j { c_kappa(&kappas[i], &ctx) } else { 0.0 };
            let est = acc[i * m + j].estimate();
            assert!(
                (est.value - target).abs() <= 4.0 * est.std_error + 1e-12,
                "l={ell} n={n} ({}) x ({}): {} +- {} vs {target}",
                kappas[i],
                kappas[j],
                est.value,
                est.std_error
            );
        }
        let mean = acc[m * m + i].estimate();
        let target = if kappas[i].is_empty() { 1.0 } else { 0.0 };
        assert!((mean.value - target).abs() <= 4.0 * mean.std_error + 1e-12, "E H_({}) = {}", kappas[i], mean.value);
    }
}

#[test]
fn orthogonal_under_matrix_normal_1x2() {
    orthogonality(1, 2, 1_000_000, 101);
}

#[test]
fn orthogonal_under_matrix_normal_2x3() {
    orthogonality(2, 3, 1_000_000, 102);
}

#[test]
fn orthogonal_under_row_covariance() {
    let (ell, n) = (2, 3);
    let sigma = DMatrix::from_row_slice(3, 3, &[1.5, 0.4, 0.0, 0.4, 1.0, -0.3, 0.0, -0.3, 0.8]);
    let det = sigma.determinant();
    let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
    let ens = MatrixEnsemble::with_sigma(ell, n, sigma.clone()).unwrap();
    let kappas = [Partition::row(1), Partition::row(2), Partition::new(vec![1, 1]).unwrap()];
    let m = kappas.len();
    let polys: Vec<HermitePoly> = kappas.iter().map(|k| HermitePoly::new(k, &ctx).unwrap()).collect();
    let whiten = sym_inv_sqrt(&sigma);
    let sigma_h = |x: &DMatrix<f64>| -> Vec<f64> {
        let w = x * &whiten;
        polys.iter().map(|p| det.powi((ell * p.kappa().weight()) as i32) * p.eval(&w).unwrap()).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let x = sample_gaussian_matrix(&ens, &mut rng);
        for (kappa, fast) in kappas.iter().zip(sigma_h(&x)) {
            let direct = hermite_eval_sigma(kappa, &x, &sigma, &ctx).unwrap();
            assert!((direct - fast).abs() < 1e-10 * (1.0 + direct.abs()));
        }
    }
    let acc = monte_carlo(RngStream::new(103, 0), 1_000_000, m * m, |rng, out| {
        let h = sigma_h(&sample_gaussian_matrix(&ens, rng));
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = h[i] * h[j];
            }
        }
    });
    for i in 0..m {
        for j in 0..m {
            let k = kappas[i].weight() as i32;
            let target = if i == j { det.powi(2 * ell as i32 * k) * c_kappa(&kappas[i], &ctx) } else { 0.0 };
            let est = acc[i * m + j].estimate();
            assert!(
                (est.value - target).abs() <= 4.0 * est.std_error,
                "({}) x ({}): {} +- {} vs {target}",
                kappas[i],
                kappas[j],
                est.value,
                est.std_error
            );
        }
    }
}

#[test]
fn dimension_mismatch_rejected() {
    let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
    assert!(hermite_eval(&Partition::row(1), &DMatrix::zeros(3, 2), &ctx).is_err());
    assert!(MatPolyContext::shared(3, 2, 6).is_err());
    assert!(hermite_eval(&Partition::row(7), &DMatrix::zeros(2, 3), &ctx).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn invariant_under_orthogonal_actions(seed in any::<u64>(), ell in 1usize..=3, extra in 0usize..=2) {
        let n = ell + extra;
        let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = standard_gaussian(ell, n, &mut rng);
        let h = sample_orthogonal(n, &mut rng);
        let o = sample_orthogonal(ell, &mut rng);
        for kappa in up_to_weight(3) {
            let base = hermite_eval(&kappa, &x, &ctx).unwrap();
            let right = hermite_eval(&kappa, &(&x * &h), &ctx).unwrap();
            let left = hermite_eval(&kappa, &(&o * &x), &ctx).unwrap();
            prop_assert!((base - right).abs() <= 1e-10 * (1.0 + base.abs()));
            prop_assert!((base - left).abs() <= 1e-10 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn identity_covariance_reduces_to_standard(seed in any::<u64>()) {
        let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = standard_gaussian(2, 3, &mut rng);
        let id = DMatrix::identity(3, 3);
        for kappa in up_to_weight(3) {
            let a = hermite_eval_sigma(&kappa, &x, &id, &ctx).unwrap();
            let b = hermite_eval(&kappa, &x, &ctx).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }
}
