//! Intrinsic and mixed volumes of ellipsoids `E_Sigma = {x : x^T Sigma^{-1} x <= 1}`.
//!
//! `V_l(E_Sigma)` has three Monte Carlo routes: Kubota's projection formula,
//! the Stiefel-frame identity
//! `V_l = C(n,l) kappa_n / kappa_{n-l} det(Sigma)^{-l/2} E_U det(U Sigma^{-1} U^T)^{-(n+1)/2}`,
//! and the Gaussian determinant mean
//! `E det(X X^T)^{1/2} = (n)_l / (2 pi)^{l/2} C(n,l)^{-1} V_l(E_Sigma)`,
//! where `(n)_l = n!/(n-l)!`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_positive_definite, det_psd, gram_eigenvalues, sym_eigen};
use crate::partitions::{binomial, gamma, ln_gamma};
use crate::sampling::{
    monte_carlo, sample_gaussian_matrix, sample_orthogonal, sample_stiefel_haar, MatrixEnsemble, RngStream,
};
use crate::stats::Estimate;

/// Volume of the unit ball `kappa_n = pi^{n/2} / Gamma(1 + n/2)`.
pub fn ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    if n <= 100 {
        return std::f64::consts::PI.powf(half) / gamma(1.0 + half).expect("positive argument");
    }
    (half * std::f64::consts::PI.ln() - ln_gamma(1.0 + half).expect("positive argument")).exp()
}

/// `V_j(B_n) = C(n,j) kappa_n / kappa_{n-j}`.
pub fn intrinsic_volume_ball(j: usize, n: usize) -> Result<f64> {
    if j > n {
        return Err(Error::Dimension(format!("need j <= n, got j = {j}, n = {n}")));
    }
    Ok(binom_f64(n, j) * ball_volume(n) / ball_volume(n - j))
}

fn binom_f64(n: usize, k: usize) -> f64 {
    crate::partitions::to_f64(&crate::partitions::Rational::from_integer(binomial(n, k)))
}

/// Falling factorial `n (n-1) ... (n-l+1)`.
fn falling_factorial(n: usize, ell: usize) -> f64 {
    (0..ell).map(|i| (n - i) as f64).product()
}

/// Which computation produced a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeRoute {
    KubotaMc,
    StiefelIdentityMc,
    DeterminantMc,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: Option<f64>,
    pub route: VolumeRoute,
}

impl VolumeEstimate {
    fn mc(est: Estimate, route: VolumeRoute) -> Self {
        Self { value: est.value, std_error: Some(est.std_error), route }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.value, std_error: self.std_error.unwrap_or(0.0) }
    }

    fn scale(self, c: f64) -> Self {
        Self { value: self.value * c, std_error: self.std_error.map(|s| s * c.abs()), route: self.route }
    }
}

/// An ellipsoid given by its positive-definite shape matrix.
#[derive(Clone, Debug)]
pub struct EllipsoidSpec {
    sigma: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EllipsoidSpec {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        check_positive_definite(&sigma)?;
        let (eigenvalues, eigenvectors) = sym_eigen(&sigma);
        Ok(Self { sigma, eigenvalues, eigenvectors })
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn from_semi_axes(axes: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(axes.len(), axes.iter().map(|a| a * a))))
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    /// `vol_n(E_Sigma) = kappa_n det(Sigma)^{1/2}`.
    pub fn volume(&self) -> f64 {
        ball_volume(self.n()) * self.eigenvalues.iter().product::<f64>().sqrt()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n() {
            return Err(Error::Dimension(format!("need 1 <= j <= n = {}, got {j}", self.n())));
        }
        Ok(())
    }
}

/// `V_j(E)` by Kubota's formula: the mean `j`-volume of projections onto
/// Haar-random `j`-planes, `kappa_j det(U Sigma U^T)^{1/2}`.
pub fn intrinsic_volume_ellipsoid_kubota(
    e: &EllipsoidSpec,
    j: usize,
    samples: usize,
    stream: RngStream,
) -> Result<VolumeEstimate> {
    e.check_index(j)?;
    let n = e.n();
    let kappa_j = ball_volume(j);
    let acc = monte_carlo(stream, samples, 1, |rng, out| {
        let u = sample_stiefel_haar(n, j, rng);
        out[0] = kappa_j * det_psd(&(&u * &e.sigma * u.transpose())).sqrt();
    });
    let flag = binom_f64(n, j) * ball_volume(n) / (ball_volume(j) * ball_volume(n - j));
    Ok(VolumeEstimate::mc(acc[0].estimate(), VolumeRoute::KubotaMc).scale(flag))
}

/// `V_l(E)` through the Stiefel-frame identity.
pub fn intrinsic_volume_ellipsoid_stiefel(
    e: &EllipsoidSpec,
    ell: usize,
    samples: usize,
    stream: RngStream,
) -> Result<VolumeEstimate> {
    e.check_index(ell)?;
    let n = e.n();
    let integral = crate::chaos::stiefel_integral(&e.sigma, ell, samples, stream)?;
    let log_det: f64 = e.eigenvalues.iter().map(|v| v.ln()).sum();
    let scale = binom_f64(n, ell) * ball_volume(n) / ball_volume(n - ell) * (-(ell as f64) / 2.0 * log_det).exp();
    Ok(VolumeEstimate::mc(integral, VolumeRoute::StiefelIdentityMc).scale(scale))
}

/// Monte Carlo `E det(X X^T)^{1/2}` with rows i.i.d. `N(0, Sigma)`.
pub fn determinant_mean_mc(sigma: &DMatrix<f64>, ell: usize, samples: usize, stream: RngStream) -> Result<Estimate> {
    let ens = MatrixEnsemble::with_sigma(ell, sigma.nrows(), sigma.clone())?;
    let acc = monte_carlo(stream, samples, 1, |rng, out| {
        let x = sample_gaussian_matrix(&ens, rng);
        out[0] = crate::chaos::sqrt_det(&gram_eigenvalues(&x));
    });
    Ok(acc[0].estimate())
}

/// `V_l(E)` from the Gaussian determinant mean.
pub fn intrinsic_volume_ellipsoid_determinant(
    e: &EllipsoidSpec,
    ell: usize,
    samples: usize,
    stream: RngStream,
) -> Result<VolumeEstimate> {
    e.check_index(ell)?;
    let n = e.n();
    let mean = determinant_mean_mc(&e.sigma, ell, samples, stream)?;
    let scale = binom_f64(n, ell) * (2.0 * std::f64::consts::PI).powf(ell as f64 / 2.0) / falling_factorial(n, ell);
    Ok(VolumeEstimate::mc(mean, VolumeRoute::DeterminantMc).scale(scale))
}

/// Prefactor turning `V_l(E_Sigma)` into `E det(X X^T)^{1/2}`.
pub fn determinant_volume_factor(ell: usize, n: usize) -> f64 {
    falling_factorial(n, ell) / ((2.0 * std::f64::consts::PI).powf(ell as f64 / 2.0) * binom_f64(n, ell))
}

/// Mixed volume `V(E[l], B_n[n-l]) = kappa_{n-l} / C(n,l) V_l(E)` from an
/// intrinsic-volume estimate.
pub fn mixed_volume_from_intrinsic(v: VolumeEstimate, ell: usize, n: usize) -> VolumeEstimate {
    v.scale(ball_volume(n - ell) / binom_f64(n, ell))
}

/// Mixed volume `V(E_Sigma[l], B_n[n-l])` with the chosen intrinsic route.
pub fn mixed_volume_ellipsoid_ball(
    e: &EllipsoidSpec,
    ell: usize,
    samples: usize,
    stream: RngStream,
    route: VolumeRoute,
) -> Result<VolumeEstimate> {
    let v = match route {
        VolumeRoute::KubotaMc => intrinsic_volume_ellipsoid_kubota(e, ell, samples, stream)?,
        VolumeRoute::StiefelIdentityMc => intrinsic_volume_ellipsoid_stiefel(e, ell, samples, stream)?,
        VolumeRoute::DeterminantMc => intrinsic_volume_ellipsoid_determinant(e, ell, samples, stream)?,
        VolumeRoute::ClosedForm => {
            return Err(Error::Unsupported("no closed form for general ellipsoids".into()));
        }
    };
    Ok(mixed_volume_from_intrinsic(v, ell, e.n()))
}

/// A random covariance `Q diag(lambda) Q^T` with Haar `Q` and eigenvalues
/// log-uniform in `[1, max_condition]`, rescaled so that the geometric mean is one.
pub fn random_covariance<R: Rng + ?Sized>(n: usize, max_condition: f64, rng: &mut R) -> DMatrix<f64> {
    let q = sample_orthogonal(n, rng);
    let logs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * max_condition.ln()).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, logs.iter().map(|l| (l - mean).exp())));
    let s = &q * d * q.transpose();
    (&s + s.transpose()) * 0.5
}

/// A convex body known through its Euclidean distance function.
pub trait ConvexBody: Sync {
    fn dim(&self) -> usize;
    /// Distance from `x` to the body; zero inside.
    fn distance(&self, x: &[f64]) -> f64;
    /// Half-width of an axis-aligned box centred at the origin containing the body.
    fn bounding_half_width(&self) -> f64;
}

impl ConvexBody for EllipsoidSpec {
    fn dim(&self) -> usize {
        self.n()
    }

    fn distance(&self, x: &[f64]) -> f64 {
        // coordinates in the principal frame
        let y: Vec<f64> = (0..self.n())
            .map(|i| (0..self.n()).map(|r| self.eigenvectors[(r, i)] * x[r]).sum())
            .collect();
        let a2 = &self.eigenvalues;
        let level: f64 = y.iter().zip(a2).map(|(yi, ai)| yi * yi / ai).sum();
        if level <= 1.0 {
            return 0.0;
        }
        // closest point p_i = a_i^2 y_i / (a_i^2 + t), t > 0 solving
        // g(t) = sum a_i^2 y_i^2 / (a_i^2 + t)^2 = 1 (g decreasing)
        let g = |t: f64| -> f64 { y.iter().zip(a2).map(|(yi, ai)| ai * yi * yi / ((ai + t) * (ai + t))).sum() };
        let (mut lo, mut hi) = (0.0, 1.0);
        while g(hi) > 1.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let t = 0.5 * (lo + hi);
        y.iter().zip(a2).map(|(yi, ai)| (yi * t / (ai + t)).powi(2)).sum::<f64>().sqrt()
    }

    fn bounding_half_width(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
    }
}

/// The segment `[-a, a] e_1` in `R^n`.
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub half_length: f64,
    pub n: usize,
}

impl ConvexBody for Segment {
    fn dim(&self) -> usize {
        self.n
    }

    fn distance(&self, x: &[f64]) -> f64 {
        let along = (x[0].abs() - self.half_length).max(0.0);
        (along * along + x[1..].iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    fn bounding_half_width(&self) -> f64 {
        self.half_length
    }
}

/// Result of comparing a parallel-body volume with the Steiner polynomial.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SteinerCheck {
    pub mc_volume: Estimate,
    pub steiner_volume: f64,
    pub relative_error: f64,
}

/// Steiner polynomial `sum_j eps^{n-j} kappa_{n-j} V_j` from `V_0, ..., V_n`.
pub fn steiner_polynomial(intrinsic: &[f64], eps: f64) -> f64 {
    let n = intrinsic.len() - 1;
    intrinsic
        .iter()
        .enumerate()
        .map(|(j, v)| eps.powi((n - j) as i32) * ball_volume(n - j) * v)
        .sum()
}

/// Hit-or-miss volume of `K + eps B_n` compared with the Steiner polynomial
/// built from the supplied intrinsic volumes `V_0, ..., V_n` of `K`.
pub fn steiner_check(
    body: &dyn ConvexBody,
    intrinsic: &[f64],
    eps: f64,
    mc_points: usize,
    stream: RngStream,
) -> Result<SteinerCheck> {
    let n = body.dim();
    if !(eps > 0.0) || n == 0 || n > 3 || intrinsic.len() != n + 1 {
        return Err(Error::Unsupported(format!(
            "Steiner check needs eps > 0, 1 <= n <= 3 and n + 1 intrinsic volumes (n = {n}, eps = {eps})"
        )));
    }
    let half = body.bounding_half_width() + eps;
    let box_volume = (2.0 * half).powi(n as i32);
    let acc = monte_carlo(stream, mc_points, 1, |rng, out| {
        let mut x = [0.0; 3];
        for v in x.iter_mut().take(n) {
            *v = (2.0 * rng.random::<f64>() - 1.0) * half;
        }
        out[0] = if body.distance(&x[..n]) <= eps { 1.0 } else { 0.0 };
    });
    let mc_volume = acc[0].estimate().scale(box_volume);
    let steiner_volume = steiner_polynomial(intrinsic, eps);
    Ok(SteinerCheck {
        mc_volume,
        steiner_volume,
        relative_error: (mc_volume.value - steiner_volume).abs() / steiner_volume,
    })
}

/// Intrinsic volumes `V_0, ..., V_n` of an ellipsoid, Kubota route for
/// `1 <= j < n` and the exact volume for `j = n`.
pub fn ellipsoid_intrinsic_volumes(e: &EllipsoidSpec, samples: usize, stream: RngStream) -> Result<Vec<f64>> {
    let n = e.n();
    let mut out = vec![1.0];
    for j in 1..n {
        out.push(intrinsic_volume_ellipsoid_kubota(e, j, samples, stream.substream(j as u64))?.value);
    }
    out.push(e.volume());
    Ok(out)
}
