//! Wiener-chaos projection coefficients of spectral functionals of a
//! Gaussian `l x n` matrix, with the closed forms for `det(X X^T)^{1/2}`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_positive_definite, det_psd, gram_eigenvalues, sym_eigenvalues};
use crate::matpoly::{c_kappa, laguerre_powersum, normalization, HermitePoly, MatPolyContext};
use crate::partitions::{factorial, gen_pochhammer_unchecked, int, ln_multivariate_gamma, to_f64, Partition, Rational};
use crate::sampling::{monte_carlo, sample_stiefel_haar, sample_wishart, standard_gaussian, RngStream};
use crate::stats::Estimate;
use crate::symfun::power_sums;

/// How a coefficient was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ClosedForm,
    MonteCarlo,
    RadialIntegral,
}

/// One projection coefficient `F^(kappa)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    #[serde(rename = "partition", with = "partition_string")]
    pub kappa: Partition,
    pub value: f64,
    pub route: Route,
    pub std_error: Option<f64>,
}

mod partition_string {
    use super::Partition;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Partition, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Partition, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl CoefficientRecord {
    fn closed(kappa: &Partition, value: f64) -> Self {
        Self { kappa: kappa.clone(), value, route: Route::ClosedForm, std_error: None }
    }

    fn estimated(kappa: &Partition, est: Estimate, route: Route) -> Self {
        Self { kappa: kappa.clone(), value: est.value, route, std_error: Some(est.std_error) }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.value, std_error: self.std_error.unwrap_or(0.0) }
    }
}

/// `2^{l/2} Gamma_l((n+1)/2) / Gamma_l(n/2) = E det(X X^T)^{1/2}`.
pub fn det_prefactor(ell: usize, n: usize) -> Result<f64> {
    let log = 0.5 * ell as f64 * std::f64::consts::LN_2 + ln_multivariate_gamma((n as f64 + 1.0) / 2.0, ell)?
        - ln_multivariate_gamma(n as f64 / 2.0, ell)?;
    Ok(log.exp())
}

fn check_dims(ell: usize, n: usize) -> Result<()> {
    if ell == 0 || ell > n {
        return Err(Error::Dimension(format!("need 1 <= l <= n, got l = {ell}, n = {n}")));
    }
    Ok(())
}

/// The exact rational factor
/// `(-2)^k / k! (n/2)_kappa sum_sigma (kappa choose sigma) (-1)^s ((n+1)/2)_sigma / (n/2)_sigma`
/// of the determinant coefficient.
pub fn det_coefficient_rational(kappa: &Partition, ctx: &MatPolyContext) -> Result<Rational> {
    if kappa.len() > ctx.ell() {
        return Err(Error::InvalidPartition(format!(
            "({kappa}) has more than l = {} parts; H_kappa vanishes identically",
            ctx.ell()
        )));
    }
    let k = kappa.weight();
    let half_n = ctx.half_n();
    let half_n1 = Rational::new(BigInt::from(ctx.n() + 1), BigInt::from(2));
    let mut sum = Rational::default();
    for (sigma, binom) in ctx.table().binomials(kappa)? {
        let sign = if sigma.weight() % 2 == 0 { int(1) } else { int(-1) };
        sum += binom * sign * gen_pochhammer_unchecked(&half_n1, sigma) / gen_pochhammer_unchecked(&half_n, sigma);
    }
    let lead = Rational::from_integer(BigInt::from(-2).pow(k as u32)) / Rational::from_integer(factorial(k));
    Ok(lead * gen_pochhammer_unchecked(&half_n, kappa) * sum)
}

/// Closed-form coefficient `F^(kappa)` of `F(X) = det(X X^T)^{1/2}` for
/// standard Gaussian `X`.
pub fn det_coefficient(kappa: &Partition, ell: usize, n: usize) -> Result<f64> {
    check_dims(ell, n)?;
    let ctx = MatPolyContext::shared(ell, n, kappa.weight().max(6))?;
    Ok(det_prefactor(ell, n)? * to_f64(&det_coefficient_rational(kappa, &ctx)?))
}

/// `E_U det(U Sigma^{-1} U^T)^{-(n+1)/2}` over Haar frames `U` in `O(n, l)`.
pub fn stiefel_integral(sigma: &DMatrix<f64>, ell: usize, samples: usize, stream: RngStream) -> Result<Estimate> {
    let n = sigma.nrows();
    check_dims(ell, n)?;
    check_positive_definite(sigma)?;
    let inv = sigma.clone().try_inverse().ok_or_else(|| Error::NotPositiveDefinite("singular Sigma".into()))?;
    let exponent = -(n as f64 + 1.0) / 2.0;
    let acc = monte_carlo(stream, samples, 1, |rng, out| {
        let u = sample_stiefel_haar(n, ell, rng);
        out[0] = det_psd(&(&u * &inv * u.transpose())).powf(exponent);
    });
    Ok(acc[0].estimate())
}

/// Coefficient `F^(kappa; Sigma)` of `det(X X^T)^{1/2}` for rows i.i.d.
/// `N(0, Sigma)`, with the Stiefel integral estimated by Haar Monte Carlo.
pub fn det_coefficient_sigma(
    kappa: &Partition,
    ell: usize,
    n: usize,
    sigma: &DMatrix<f64>,
    stiefel_samples: usize,
    stream: RngStream,
) -> Result<CoefficientRecord> {
    check_dims(ell, n)?;
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::Dimension(format!("Sigma must be {n}x{n}")));
    }
    let ctx = MatPolyContext::shared(ell, n, kappa.weight().max(6))?;
    let exact = det_coefficient_rational(kappa, &ctx)?;
    let integral = stiefel_integral(sigma, ell, stiefel_samples, stream)?;
    let log_det = sym_eigenvalues(sigma).iter().map(|v| v.ln()).sum::<f64>();
    let scale = det_prefactor(ell, n)?
        * to_f64(&exact)
        * (-(ell as f64) * (kappa.weight() as f64 + 0.5) * log_det).exp();
    Ok(CoefficientRecord::estimated(kappa, integral.scale(scale), Route::MonteCarlo))
}

/// `c(kappa)^{-1} E[F(X) H_kappa(X)]` by Monte Carlo over standard Gaussian
/// `X`. `f` receives the eigenvalues of `X X^T`.
pub fn coefficient_mc<F>(
    f: F,
    kappa: &Partition,
    ctx: &MatPolyContext,
    samples: usize,
    stream: RngStream,
) -> Result<CoefficientRecord>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(coefficients_mc(f, std::slice::from_ref(kappa), ctx, samples, stream)?.remove(0))
}

/// [`coefficient_mc`] for several partitions from the same draws.
pub fn coefficients_mc<F>(
    f: F,
    kappas: &[Partition],
    ctx: &MatPolyContext,
    samples: usize,
    stream: RngStream,
) -> Result<Vec<CoefficientRecord>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let polys = kappas.iter().map(|k| HermitePoly::new(k, ctx)).collect::<Result<Vec<_>>>()?;
    let degree = kappas.iter().map(Partition::weight).max().unwrap_or(0);
    let (ell, n) = (ctx.ell(), ctx.n());
    let acc = monte_carlo(stream, samples, polys.len(), |rng, out| {
        let x = standard_gaussian(ell, n, rng);
        let eig = gram_eigenvalues(&x);
        let t = power_sums(&eig, degree);
        let fx = f(&eig);
        for (o, h) in out.iter_mut().zip(&polys) {
            *o = fx * h.eval_power_sums(&t);
        }
    });
    Ok(kappas
        .iter()
        .zip(acc)
        .map(|(kappa, w)| {
            let c = c_kappa(kappa, ctx);
            CoefficientRecord::estimated(kappa, w.estimate().scale(1.0 / c), Route::MonteCarlo)
        })
        .collect())
}

/// Coefficient of a radial functional `F(X) = f0(X X^T)` through the
/// integral over positive-definite matrices:
/// `F^(kappa) = (-2)^k / (k! C_kappa(Id_l)) E[f0(R) L_kappa^((n-l-1)/2)(R/2)]`
/// with `R` Wishart `W_l(n, Id)`, sampled by the Bartlett decomposition.
/// `f0` receives the eigenvalues of `R`.
pub fn radial_coefficient_integral<F>(
    f0: F,
    kappa: &Partition,
    ctx: &MatPolyContext,
    samples: usize,
    stream: RngStream,
) -> Result<CoefficientRecord>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if kappa.len() > ctx.ell() {
        return Err(Error::InvalidPartition(format!("({kappa}) has more than l = {} parts", ctx.ell())));
    }
    let lag = laguerre_powersum(ctx.table(), kappa, &ctx.half_n(), ctx.ell())?.compile();
    let k = kappa.weight();
    let scale = (-2f64).powi(k as i32)
        / (to_f64(&Rational::from_integer(factorial(k))) * to_f64(&ctx.table().identity_value(kappa, ctx.ell())?));
    let (ell, n) = (ctx.ell(), ctx.n());
    let acc = monte_carlo(stream, samples, 1, |rng, out| {
        let r = sample_wishart(ell, n, rng);
        let eig = sym_eigenvalues(&r);
        let half: Vec<f64> = eig.iter().map(|v| v / 2.0).collect();
        out[0] = f0(&eig) * lag.eval(&power_sums(&half, k));
    });
    Ok(CoefficientRecord::estimated(kappa, acc[0].estimate().scale(scale), Route::RadialIntegral))
}

/// Coefficients of one functional up to some weight, with their context.
#[derive(Clone, Debug)]
pub struct ChaosExpansion {
    pub context: MatPolyContext,
    pub coefficients: Vec<CoefficientRecord>,
}

impl ChaosExpansion {
    /// Closed-form expansion of `det(X X^T)^{1/2}` through weight `max_weight`.
    pub fn determinant(ell: usize, n: usize, max_weight: usize) -> Result<Self> {
        check_dims(ell, n)?;
        let context = MatPolyContext::shared(ell, n, max_weight.max(6))?;
        let prefactor = det_prefactor(ell, n)?;
        let mut coefficients = Vec::new();
        for k in 0..=max_weight {
            for kappa in crate::partitions::enumerate_partitions(k, ell) {
                let value = prefactor * to_f64(&det_coefficient_rational(&kappa, &context)?);
                coefficients.push(CoefficientRecord::closed(&kappa, value));
            }
        }
        Ok(Self { context, coefficients })
    }

    pub fn max_weight(&self) -> usize {
        self.coefficients.iter().map(|c| c.kappa.weight()).max().unwrap_or(0)
    }

    /// Truncation `sum_{|kappa| <= k_max} F^(kappa) H_kappa(X)` at one `X`.
    pub fn truncated_eval(&self, polys: &[HermitePoly], gram_eigenvalues: &[f64], k_max: usize) -> f64 {
        let t = power_sums(gram_eigenvalues, self.max_weight());
        self.coefficients
            .iter()
            .zip(polys)
            .filter(|(c, _)| c.kappa.weight() <= k_max)
            .map(|(c, h)| c.value * h.eval_power_sums(&t))
            .sum()
    }

    pub fn hermite_polys(&self) -> Result<Vec<HermitePoly>> {
        self.coefficients.iter().map(|c| HermitePoly::new(&c.kappa, &self.context)).collect()
    }
}

/// Partial sums `S_K = sum_{1 <= k <= K} sum_{kappa |- k} c(kappa) F^(kappa)^2`
/// for `K = 1..=max_k`; entry `K - 1` holds `S_K`.
pub fn variance_expansion(expansion: &ChaosExpansion, max_k: usize) -> Result<Vec<f64>> {
    if max_k > expansion.max_weight() {
        return Err(Error::Unsupported(format!(
            "coefficients are available up to weight {}, requested {max_k}",
            expansion.max_weight()
        )));
    }
    let mut terms = vec![0.0; max_k + 1];
    for c in &expansion.coefficients {
        let k = c.kappa.weight();
        if (1..=max_k).contains(&k) {
            let norm = normalization(&c.kappa, &expansion.context);
            terms[k] += to_f64(&norm.c_kappa) * c.value * c.value;
        }
    }
    Ok(terms[1..]
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect())
}

/// Monte Carlo `E[(F - sum_{|kappa| <= K} F^(kappa) H_kappa)^2]` for
/// `K = 0..=max_weight`.
pub fn truncation_errors<F>(
    f: F,
    expansion: &ChaosExpansion,
    samples: usize,
    stream: RngStream,
) -> Result<Vec<Estimate>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let polys = expansion.hermite_polys()?;
    let kmax = expansion.max_weight();
    let (ell, n) = (expansion.context.ell(), expansion.context.n());
    let acc = monte_carlo(stream, samples, kmax + 1, |rng, out| {
        let x = standard_gaussian(ell, n, rng);
        let eig = gram_eigenvalues(&x);
        let fx = f(&eig);
        for (k, o) in out.iter_mut().enumerate() {
            let r = fx - expansion.truncated_eval(&polys, &eig, k);
            *o = r * r;
        }
    });
    Ok(acc.iter().map(|w| w.estimate()).collect())
}

/// `det(X X^T)^{1/2}` from the eigenvalues of `X X^T`.
pub fn sqrt_det(gram_eigenvalues: &[f64]) -> f64 {
    gram_eigenvalues.iter().map(|v| v.max(0.0)).product::<f64>().sqrt()
}
