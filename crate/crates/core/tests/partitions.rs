use num_traits::One;
use proptest::prelude::*;
use zonalchaos::partitions::{
    enumerate_partitions, gen_pochhammer, gen_pochhammer_f64, multivariate_gamma, ratio, rising_factorial, Rational,
};
use zonalchaos::Partition;

// partitions of k into parts of size at most m
fn count(k: usize, m: usize) -> usize {
    if k == 0 {
        return 1;
    }
    if m == 0 {
        return 0;
    }
    (1..=m.min(k)).map(|p| count(k - p, p)).sum()
}

// Gamma at positive half-integers by the recurrence
fn gamma_oracle(x: f64) -> f64 {
    let mut base = if x.fract() == 0.0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut y = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while y < x {
        base *= y;
        y += 1.0;
    }
    base
}

#[test]
fn partition_counts_match_recursion() {
    let known = [1, 1, 2, 3, 5, 7, 11, 15, 22];
    for k in 0..=8 {
        let all = enumerate_partitions(k, k.max(1));
        assert_eq!(all.len(), count(k, k), "k = {k}");
        assert_eq!(all.len(), known[k]);
        // conjugation swaps the number of parts with the largest part
        for len in 1..=4 {
            assert_eq!(enumerate_partitions(k, len).len(), count(k, len), "k = {k}, len = {len}");
        }
        for p in &all {
            assert_eq!(p.weight(), k);
            assert!(p.parts().windows(2).all(|w| w[0] >= w[1]));
        }
        // reverse lexicographic and distinct
        assert!(all.windows(2).all(|w| w[0].parts() > w[1].parts()));
    }
}

#[test]
fn single_row_pochhammer_is_rising_factorial() {
    for (num, den) in [(1, 2), (3, 2), (2, 1), (7, 3), (-5, 4)] {
        let a = ratio(num, den);
        for k in 0..=10u32 {
            let row = if k == 0 { Partition::empty() } else { Partition::row(k) };
            let mut oracle = Rational::one();
            for i in 0..k {
                oracle *= &a + Rational::from_integer(i.into());
            }
            assert_eq!(gen_pochhammer(&a, &row, 1).unwrap(), oracle);
            assert_eq!(rising_factorial(&a, k), oracle);
        }
    }
}

#[test]
fn multivariate_gamma_single_row_matches_gamma() {
    for i in 1..=20 {
        let a = i as f64 / 2.0;
        let got = multivariate_gamma(a, 1).unwrap();
        let want = gamma_oracle(a);
        assert!(((got - want) / want).abs() < 1e-12, "a = {a}: {got} vs {want}");
    }
}

#[test]
fn multivariate_gamma_product_formula() {
    for ell in 2..=4usize {
        for i in ell..=20 {
            let a = i as f64 / 2.0;
            let want = std::f64::consts::PI.powf((ell * (ell - 1)) as f64 / 4.0)
                * (0..ell).map(|j| gamma_oracle(a - j as f64 / 2.0)).product::<f64>();
            let got = multivariate_gamma(a, ell).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "a = {a}, l = {ell}");
        }
    }
}

#[test]
fn overlong_partition_rejected() {
    let kappa = Partition::new(vec![2, 1, 1]).unwrap();
    assert!(gen_pochhammer(&ratio(3, 2), &kappa, 2).is_err());
    assert!(Partition::new(vec![1, 2]).is_err());
    assert!("2,3".parse::<Partition>().is_err());
    assert_eq!("0".parse::<Partition>().unwrap(), Partition::empty());
}

fn partition_strategy() -> impl Strategy<Value = Partition> {
    prop::collection::vec(1u32..5, 0..4).prop_map(Partition::from_unsorted)
}

proptest! {
    #[test]
    fn pochhammer_float_matches_exact(p in partition_strategy(), num in 1i64..30) {
        let a = ratio(num, 2);
        let exact = zonalchaos::partitions::to_f64(&gen_pochhammer(&a, &p, 4).unwrap());
        let float = gen_pochhammer_f64(num as f64 / 2.0, &p, 4).unwrap();
        prop_assert!((exact - float).abs() <= 1e-12 * exact.abs().max(1.0));
    }

    #[test]
    fn display_round_trips(p in partition_strategy()) {
        let back: Partition = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }
}
