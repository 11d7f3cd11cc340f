use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonalchaos::chaos::det_coefficient;
use zonalchaos::geometry::{
    ball_volume, determinant_volume_factor, ellipsoid_intrinsic_volumes, intrinsic_volume_ball,
    intrinsic_volume_ellipsoid_determinant, intrinsic_volume_ellipsoid_kubota, intrinsic_volume_ellipsoid_stiefel,
    mixed_volume_ellipsoid_ball, mixed_volume_from_intrinsic, random_covariance, steiner_check, EllipsoidSpec,
    Segment, VolumeRoute,
};
use zonalchaos::sampling::RngStream;
use zonalchaos::stats::Estimate;

fn agree(a: Estimate, b: Estimate) -> bool {
    (a.value - b.value).abs() <= 4.0 * a.std_error.hypot(b.std_error) + 1e-12 * a.value.abs()
}

// half the perimeter of the ellipse with semi-axes a, b by the midpoint rule
fn half_perimeter(a: f64, b: f64) -> f64 {
    let m = 200_000;
    let h = 2.0 * PI / m as f64;
    (0..m).map(|i| {
        let t = (i as f64 + 0.5) * h;
        (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt() * h
    }).sum::<f64>() / 2.0
}

// half the surface area of the oblate spheroid with semi-axes a, a, c (c < a)
fn half_spheroid_area(a: f64, c: f64) -> f64 {
    let e = (1.0 - c * c / (a * a)).sqrt();
    PI * a * a * (1.0 + (1.0 - e * e) / e * e.atanh())
}

#[test]
fn ball_intrinsic_volumes() {
    assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    assert!((intrinsic_volume_ball(1, 2).unwrap() - PI).abs() < 1e-14);
    assert!((intrinsic_volume_ball(2, 3).unwrap() - 2.0 * PI).abs() < 1e-13);
    assert!((intrinsic_volume_ball(1, 3).unwrap() - 4.0).abs() < 1e-13);
    assert!((intrinsic_volume_ball(0, 5).unwrap() - 1.0).abs() < 1e-14);
    assert!(intrinsic_volume_ball(4, 3).is_err());
}

#[test]
fn ellipse_perimeter() {
    let e = EllipsoidSpec::from_semi_axes(&[2.0, 0.7]).unwrap();
    let want = half_perimeter(2.0, 0.7);
    let k = intrinsic_volume_ellipsoid_kubota(&e, 1, 400_000, RngStream::new(1, 0)).unwrap();
    let s = intrinsic_volume_ellipsoid_stiefel(&e, 1, 400_000, RngStream::new(2, 0)).unwrap();
    let d = intrinsic_volume_ellipsoid_determinant(&e, 1, 400_000, RngStream::new(3, 0)).unwrap();
    for v in [k, s, d] {
        assert!(agree(v.estimate(), Estimate::exact(want)), "{v:?} vs {want}");
    }
}

#[test]
fn spheroid_surface() {
    let e = EllipsoidSpec::from_semi_axes(&[1.5, 1.5, 0.6]).unwrap();
    let want = half_spheroid_area(1.5, 0.6);
    let k = intrinsic_volume_ellipsoid_kubota(&e, 2, 400_000, RngStream::new(4, 0)).unwrap();
    let s = intrinsic_volume_ellipsoid_stiefel(&e, 2, 400_000, RngStream::new(5, 0)).unwrap();
    assert!(agree(k.estimate(), Estimate::exact(want)), "{k:?} vs {want}");
    assert!(agree(s.estimate(), Estimate::exact(want)), "{s:?} vs {want}");
}

#[test]
fn top_index_is_the_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 1..=4 {
        let e = EllipsoidSpec::new(random_covariance(n, 50.0, &mut rng)).unwrap();
        let want = ball_volume(n) * e.sigma().determinant().sqrt();
        assert!((e.volume() - want).abs() < 1e-12 * want);
        for v in [
            intrinsic_volume_ellipsoid_kubota(&e, n, 1000, RngStream::new(7, 0)).unwrap(),
            intrinsic_volume_ellipsoid_stiefel(&e, n, 1000, RngStream::new(8, 0)).unwrap(),
        ] {
            assert!((v.value - want).abs() < 1e-10 * want, "n = {n}: {v:?} vs {want}");
        }
    }
}

#[test]
fn routes_agree_on_random_ellipsoids() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..6u64 {
        let n = 2 + (i as usize % 3);
        let ell = 1 + (i as usize % (n - 1));
        let e = EllipsoidSpec::new(random_covariance(n, 100.0, &mut rng)).unwrap();
        let k = intrinsic_volume_ellipsoid_kubota(&e, ell, 100_000, RngStream::new(10, i)).unwrap();
        let s = intrinsic_volume_ellipsoid_stiefel(&e, ell, 100_000, RngStream::new(11, i)).unwrap();
        let d = intrinsic_volume_ellipsoid_determinant(&e, ell, 100_000, RngStream::new(12, i)).unwrap();
        assert!(agree(k.estimate(), s.estimate()), "n={n} l={ell}: {k:?} vs {s:?}");
        assert!(agree(k.estimate(), d.estimate()), "n={n} l={ell}: {k:?} vs {d:?}");
    }
}

#[test]
fn mixed_volumes() {
    // V(B[l], B[n-l]) = kappa_n
    for n in 2..=5 {
        for ell in 1..=n {
            let b = EllipsoidSpec::from_semi_axes(&vec![1.0; n]).unwrap();
            let v = mixed_volume_ellipsoid_ball(&b, ell, 1000, RngStream::new(13, 0), VolumeRoute::KubotaMc).unwrap();
            assert!((v.value - ball_volume(n)).abs() < 1e-10, "n={n} l={ell}");
        }
    }
    let e = EllipsoidSpec::from_semi_axes(&[2.0, 1.0, 0.5]).unwrap();
    let v = intrinsic_volume_ellipsoid_kubota(&e, 2, 1000, RngStream::new(14, 0)).unwrap();
    let m = mixed_volume_from_intrinsic(v, 2, 3);
    assert!((m.value - v.value * ball_volume(1) / 3.0).abs() < 1e-12);
    let full = mixed_volume_ellipsoid_ball(&e, 3, 1000, RngStream::new(15, 0), VolumeRoute::StiefelIdentityMc).unwrap();
    assert!((full.value - e.volume()).abs() < 1e-10);
    assert!(mixed_volume_ellipsoid_ball(&e, 1, 10, RngStream::new(16, 0), VolumeRoute::ClosedForm).is_err());

    // the mean of det(X X^T)^{1/2} for Sigma = Id is the factor times V_l(B_n)
    for (ell, n) in [(1, 1), (1, 3), (2, 3), (3, 5)] {
        let want = det_coefficient(&zonalchaos::Partition::empty(), ell, n).unwrap();
        let got = determinant_volume_factor(ell, n) * intrinsic_volume_ball(ell, n).unwrap();
        assert!((got - want).abs() < 1e-12 * want, "l={ell} n={n}: {got} vs {want}");
    }
}

#[test]
fn steiner_formula() {
    let disk = EllipsoidSpec::from_semi_axes(&[1.0, 1.0]).unwrap();
    let vols = [1.0, PI, PI];
    let chk = steiner_check(&disk, &vols, 0.5, 2_000_000, RngStream::new(17, 0)).unwrap();
    assert!((chk.steiner_volume - PI * 2.25).abs() < 1e-12);
    assert!(chk.relative_error < 0.01, "{chk:?}");

    let seg = Segment { half_length: 1.5, n: 2 };
    let chk = steiner_check(&seg, &[1.0, 3.0, 0.0], 0.4, 2_000_000, RngStream::new(18, 0)).unwrap();
    assert!((chk.steiner_volume - (3.0 * 0.8 + PI * 0.16)).abs() < 1e-12);
    assert!(chk.relative_error < 0.01, "{chk:?}");

    let e = EllipsoidSpec::from_semi_axes(&[1.2, 0.8, 0.5]).unwrap();
    let vols = ellipsoid_intrinsic_volumes(&e, 200_000, RngStream::new(19, 0)).unwrap();
    let chk = steiner_check(&e, &vols, 0.3, 2_000_000, RngStream::new(20, 0)).unwrap();
    assert!(chk.relative_error < 0.01, "{chk:?}");
    assert!(steiner_check(&e, &vols, 0.0, 10, RngStream::new(21, 0)).is_err());
}

#[test]
fn invalid_inputs() {
    assert!(EllipsoidSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    let e = EllipsoidSpec::from_semi_axes(&[1.0, 2.0]).unwrap();
    assert!(intrinsic_volume_ellipsoid_kubota(&e, 0, 10, RngStream::new(0, 0)).is_err());
    assert!(intrinsic_volume_ellipsoid_stiefel(&e, 3, 10, RngStream::new(0, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn homogeneous_and_monotone(seed in any::<u64>(), n in 2usize..=4, c in 0.3f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = random_covariance(n, 100.0, &mut rng);
        let extra = random_covariance(n, 100.0, &mut rng) * 0.5;
        let e = EllipsoidSpec::new(sigma.clone()).unwrap();
        let scaled = EllipsoidSpec::new(&sigma * (c * c)).unwrap();
        let bigger = EllipsoidSpec::new(&sigma + extra).unwrap();
        let stream = RngStream::new(seed, 1);
        for j in 1..=n {
            let v = intrinsic_volume_ellipsoid_kubota(&e, j, 4000, stream).unwrap();
            let vs = intrinsic_volume_ellipsoid_kubota(&scaled, j, 4000, stream).unwrap();
            let vb = intrinsic_volume_ellipsoid_kubota(&bigger, j, 4000, stream).unwrap();
            // common frames make both relations hold draw by draw
            prop_assert!((vs.value - c.powi(j as i32) * v.value).abs() <= 1e-10 * vs.value);
            prop_assert!(vb.value >= v.value);
        }
    }
}
