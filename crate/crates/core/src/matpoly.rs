//! Generalized Laguerre polynomials `L_kappa^(gamma)` of a symmetric matrix
//! argument and matrix-variate Hermite polynomials `H_kappa^(l,n)`.
//!
//! Both are kept as exact polynomials in the power sums of the eigenvalues.
//! Hermite polynomials use the Laguerre link
//! `H_kappa(X) = gamma_kappa L_kappa^((n-l-1)/2)(X X^T / 2)` with
//! `gamma_kappa = (-2)^{-k} (n/2)_kappa^{-1}`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{check_positive_definite, det_psd, gram_eigenvalues, sym_inv_sqrt};
use crate::partitions::{factorial, gen_pochhammer_f64, gen_pochhammer_unchecked, int, to_f64, Partition, Rational};
use crate::symfun::{power_sums, CompiledPowerSum, PowerSumPoly};
use crate::zonal::ZonalTable;

/// Dimensions and table shared by the polynomial families on `l x n` matrices.
#[derive(Clone, Debug)]
pub struct MatPolyContext {
    ell: usize,
    n: usize,
    table: Arc<ZonalTable>,
}

impl MatPolyContext {
    pub fn new(ell: usize, n: usize, table: Arc<ZonalTable>) -> Result<Self> {
        if ell == 0 || ell > n {
            return Err(Error::Dimension(format!("need 1 <= l <= n, got l = {ell}, n = {n}")));
        }
        Ok(Self { ell, n, table })
    }

    /// Context backed by the process-wide table of at least `max_degree`.
    pub fn shared(ell: usize, n: usize, max_degree: usize) -> Result<Self> {
        Self::new(ell, n, ZonalTable::shared(max_degree))
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &ZonalTable {
        &self.table
    }

    /// Laguerre order `(n - l - 1)/2` of the Hermite link.
    pub fn gamma_order(&self) -> Rational {
        Rational::new(BigInt::from(self.n as i64 - self.ell as i64 - 1), BigInt::from(2))
    }

    /// `n/2`.
    pub fn half_n(&self) -> Rational {
        Rational::new(BigInt::from(self.n), BigInt::from(2))
    }

    fn check_degree(&self, kappa: &Partition) -> Result<()> {
        if kappa.weight() > self.table.max_degree() {
            return Err(Error::TableTooSmall { needed: kappa.weight(), have: self.table.max_degree() });
        }
        Ok(())
    }
}

/// Exact normalization constants of `H_kappa`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteNormalization {
    /// `c(kappa) = 4^{-k} (n/2)_kappa^{-1} k! C_kappa(Id_l) = E[H_kappa^2]`.
    pub c_kappa: Rational,
    /// `gamma_kappa = (-2)^{-k} (n/2)_kappa^{-1}`.
    pub gamma_kappa: Rational,
}

/// For `kappa` with more than `l` parts `H_kappa` vanishes identically and
/// both constants are zero.
pub fn normalization(kappa: &Partition, ctx: &MatPolyContext) -> HermiteNormalization {
    if kappa.len() > ctx.ell {
        return HermiteNormalization { c_kappa: Rational::zero(), gamma_kappa: Rational::zero() };
    }
    let k = kappa.weight();
    let poch = gen_pochhammer_unchecked(&ctx.half_n(), kappa);
    let c_id = crate::zonal::zonal_identity_value(kappa, ctx.ell);
    let c_kappa = Rational::from_integer(factorial(k)) * c_id / (Rational::from_integer(BigInt::from(4).pow(k as u32)) * &poch);
    let gamma_kappa = Rational::one() / (Rational::from_integer(BigInt::from(-2).pow(k as u32)) * poch);
    HermiteNormalization { c_kappa, gamma_kappa }
}

/// `c(kappa)` in floating point.
pub fn c_kappa(kappa: &Partition, ctx: &MatPolyContext) -> f64 {
    to_f64(&normalization(kappa, ctx).c_kappa)
}

/// `L_kappa^(gamma)(S)` as an exact polynomial in the power sums of `S`,
/// with `a = gamma + (l+1)/2`:
/// `(a)_kappa C_kappa(Id_l) sum_sigma (kappa choose sigma) (-1)^s / (a)_sigma C_sigma(S) / C_sigma(Id_l)`.
///
/// Partitions with more than `l` parts give the zero polynomial since
/// `C_kappa(Id_l) = 0`.
pub fn laguerre_powersum(table: &ZonalTable, kappa: &Partition, a: &Rational, ell: usize) -> Result<PowerSumPoly> {
    if kappa.len() > ell {
        table.entry(kappa)?;
        return Ok(PowerSumPoly::default());
    }
    let prefactor = gen_pochhammer_unchecked(a, kappa) * table.identity_value(kappa, ell)?;
    let mut out = PowerSumPoly::default();
    for (sigma, binom) in table.binomials(kappa)? {
        let sign = if sigma.weight() % 2 == 0 { int(1) } else { int(-1) };
        let coef = &prefactor * binom * sign
            / (gen_pochhammer_unchecked(a, sigma) * table.identity_value(sigma, ell)?);
        out = out.add(&table.powersum(sigma)?.scale(&coef));
    }
    Ok(out)
}

/// `L_kappa^(gamma)(S)` from the eigenvalues of the `l x l` matrix `S`.
pub fn laguerre_eval(kappa: &Partition, gamma: f64, eigenvalues: &[f64], ctx: &MatPolyContext) -> Result<f64> {
    if !(gamma > -1.0) {
        return Err(Error::Unsupported(format!("Laguerre order must exceed -1, got {gamma}")));
    }
    if eigenvalues.len() != ctx.ell {
        return Err(Error::Dimension(format!("expected {} eigenvalues, got {}", ctx.ell, eigenvalues.len())));
    }
    ctx.check_degree(kappa)?;
    if kappa.len() > ctx.ell {
        return Ok(0.0);
    }
    let table = ctx.table();
    let a = gamma + (ctx.ell as f64 + 1.0) / 2.0;
    let t = power_sums(eigenvalues, kappa.weight());
    let prefactor = gen_pochhammer_f64(a, kappa, ctx.ell)? * to_f64(&table.identity_value(kappa, ctx.ell)?);
    let mut acc = 0.0;
    for (sigma, binom) in table.binomials(kappa)? {
        let sign = if sigma.weight() % 2 == 0 { 1.0 } else { -1.0 };
        let denom = gen_pochhammer_f64(a, sigma, ctx.ell)? * to_f64(&table.identity_value(sigma, ctx.ell)?);
        acc += sign * to_f64(binom) / denom * table.eval_power_sums(sigma, &t)?;
    }
    Ok(prefactor * acc)
}

/// `H_kappa^(l,n)` as an exact polynomial in the power sums of `X X^T`.
#[derive(Clone, Debug)]
pub struct HermitePoly {
    kappa: Partition,
    ell: usize,
    n: usize,
    poly: PowerSumPoly,
    compiled: CompiledPowerSum,
}

impl HermitePoly {
    pub fn new(kappa: &Partition, ctx: &MatPolyContext) -> Result<Self> {
        ctx.check_degree(kappa)?;
        let a = ctx.half_n();
        let lag = laguerre_powersum(ctx.table(), kappa, &a, ctx.ell)?;
        let gamma = normalization(kappa, ctx).gamma_kappa;
        // t_s(X X^T / 2) = 2^{-s} t_s(X X^T)
        let poly = PowerSumPoly::from_terms(lag.terms().iter().map(|(nu, c)| {
            let scale = Rational::new(BigInt::one(), BigInt::from(2).pow(nu.weight() as u32));
            (nu.clone(), c * &gamma * scale)
        }));
        let compiled = poly.compile();
        Ok(Self { kappa: kappa.clone(), ell: ctx.ell, n: ctx.n, poly, compiled })
    }

    pub fn kappa(&self) -> &Partition {
        &self.kappa
    }

    /// Exact coefficients on `prod t_{nu_i}(X X^T)`.
    pub fn powersum(&self) -> &PowerSumPoly {
        &self.poly
    }

    /// Evaluates from the power sums `t_1, t_2, ...` of `X X^T`.
    pub fn eval_power_sums(&self, power_sums: &[f64]) -> f64 {
        self.compiled.eval(power_sums)
    }

    /// Evaluates from the eigenvalues of `X X^T`.
    pub fn eval_gram_eigenvalues(&self, eigenvalues: &[f64]) -> f64 {
        self.compiled.eval(&power_sums(eigenvalues, self.compiled.degree()))
    }

    pub fn eval(&self, x: &DMatrix<f64>) -> Result<f64> {
        if x.nrows() != self.ell || x.ncols() != self.n {
            return Err(Error::Dimension(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.ell,
                self.n,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(self.eval_gram_eigenvalues(&gram_eigenvalues(x)))
    }
}

/// `H_kappa^(l,n)(X)`.
pub fn hermite_eval(kappa: &Partition, x: &DMatrix<f64>, ctx: &MatPolyContext) -> Result<f64> {
    HermitePoly::new(kappa, ctx)?.eval(x)
}

/// `H_kappa(X; Sigma) = det(Sigma)^{l k} H_kappa(X Sigma^{-1/2})`.
pub fn hermite_eval_sigma(
    kappa: &Partition,
    x: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    ctx: &MatPolyContext,
) -> Result<f64> {
    if sigma.nrows() != ctx.n || sigma.ncols() != ctx.n {
        return Err(Error::Dimension(format!("Sigma must be {0}x{0}", ctx.n)));
    }
    check_positive_definite(sigma)?;
    let whitened = x * sym_inv_sqrt(sigma);
    let scale = det_psd(sigma).powi((ctx.ell * kappa.weight()) as i32);
    Ok(scale * hermite_eval(kappa, &whitened, ctx)?)
}

/// Probabilists' Hermite polynomial `H_k(x)`.
pub fn hermite_1d(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Entry-wise expansions of `H_(1)`, `H_(2)` and `H_(1,1)` in univariate
/// Hermite polynomials.
pub fn hermite_univariate_expansion(kappa: &Partition, x: &DMatrix<f64>) -> Result<f64> {
    let (ell, n) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let h1 = |i: usize, j: usize| x[(i, j)];
    let h2 = |i: usize, j: usize| hermite_1d(2, x[(i, j)]);
    let h4 = |i: usize, j: usize| hermite_1d(4, x[(i, j)]);
    // sums over i1 != i2, j1 != j2
    let mut cross_h2 = 0.0;
    let mut cross_h1 = 0.0;
    for i1 in 0..ell {
        for i2 in 0..ell {
            if i1 == i2 {
                continue;
            }
            for j1 in 0..n {
                for j2 in 0..n {
                    if j1 == j2 {
                        continue;
                    }
                    cross_h2 += h2(i1, j1) * h2(i2, j2);
                    cross_h1 += h1(i1, j1) * h1(i2, j1) * h1(i1, j2) * h1(i2, j2);
                }
            }
        }
    }
    match kappa.parts() {
        [] => Ok(1.0),
        [1] => {
            let s: f64 = (0..ell).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| h2(i, j)).sum();
            Ok(s / (2.0 * nf))
        }
        [2] => {
            let mut diag4 = 0.0;
            let mut same_col = 0.0;
            let mut same_row = 0.0;
            for i in 0..ell {
                for j in 0..n {
                    diag4 += h4(i, j);
                    for i2 in 0..ell {
                        if i2 != i {
                            same_col += h2(i, j) * h2(i2, j);
                        }
                    }
                    for j2 in 0..n {
                        if j2 != j {
                            same_row += h2(i, j) * h2(i, j2);
                        }
                    }
                }
            }
            let total = 3.0 * diag4 + 3.0 * same_col + 3.0 * same_row + cross_h2 + 2.0 * cross_h1;
            Ok(total / (12.0 * nf * (nf + 2.0)))
        }
        [1, 1] => {
            if n < 2 {
                return Ok(0.0);
            }
            Ok((cross_h2 - cross_h1) / (6.0 * nf * (nf - 1.0)))
        }
        _ => Err(Error::Unsupported(format!("no entry-wise expansion for ({kappa})"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::ratio;
    use crate::sampling::{standard_gaussian, RngStream};

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn first_hermite_polynomial_matches_expansion() {
        let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..10 {
            let x = standard_gaussian(2, 3, &mut rng);
            let a = hermite_eval(&p(&[1]), &x, &ctx).unwrap();
            let b = hermite_univariate_expansion(&p(&[1]), &x).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn hermite_at_zero() {
        for (ell, n) in [(1, 1), (2, 3), (3, 5)] {
            let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
            let zero = DMatrix::zeros(ell, n);
            let h = hermite_eval(&p(&[1]), &zero, &ctx).unwrap();
            assert!((h + ell as f64 / 2.0).abs() < 1e-12);
            assert_eq!(hermite_eval(&Partition::empty(), &zero, &ctx).unwrap(), 1.0);
        }
    }

    #[test]
    fn one_by_one_reduces_to_classical_hermite() {
        let ctx = MatPolyContext::shared(1, 1, 6).unwrap();
        for k in 1..=5usize {
            let scale = 1.0 / (4f64.powi(k as i32) * crate::partitions::rising_factorial_f64(0.5, k as u32));
            for &x in &[-1.3, 0.0, 0.4, 2.2] {
                let xm = DMatrix::from_element(1, 1, x);
                let h = hermite_eval(&Partition::row(k as u32), &xm, &ctx).unwrap();
                let expected = scale * hermite_1d(2 * k, x);
                assert!((h - expected).abs() < 1e-10 * (1.0 + expected.abs()), "k = {k}, x = {x}");
            }
        }
    }

    #[test]
    fn zero_order_laguerre_and_single_part() {
        let ctx = MatPolyContext::shared(2, 4, 6).unwrap();
        assert_eq!(laguerre_eval(&Partition::empty(), 0.3, &[1.0, 2.0], &ctx).unwrap(), 1.0);
        // l = 1, kappa = (1): L(s) = a - s with a = gamma + 1
        let ctx1 = MatPolyContext::shared(1, 3, 6).unwrap();
        let gamma = 0.7;
        let v = laguerre_eval(&p(&[1]), gamma, &[2.5], &ctx1).unwrap();
        assert!((v - (gamma + 1.0 - 2.5)).abs() < 1e-12);
        assert!(laguerre_eval(&p(&[1]), -1.0, &[2.5], &ctx1).is_err());
    }

    #[test]
    fn normalization_constants() {
        for (ell, n) in [(1, 2), (2, 3), (3, 7)] {
            let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
            let norm = normalization(&p(&[1]), &ctx);
            assert_eq!(norm.c_kappa, ratio(ell as i64, 2 * n as i64));
            assert_eq!(norm.gamma_kappa, ratio(-1, n as i64));
        }
    }

    #[test]
    fn sigma_variant() {
        let ctx = MatPolyContext::shared(2, 3, 6).unwrap();
        let mut rng = RngStream::new(9, 1).rng();
        let x = standard_gaussian(2, 3, &mut rng);
        let id = DMatrix::identity(3, 3);
        let a = hermite_eval_sigma(&p(&[2]), &x, &id, &ctx).unwrap();
        assert!((a - hermite_eval(&p(&[2]), &x, &ctx).unwrap()).abs() < 1e-12);
        let c: f64 = 1.7;
        let scaled = hermite_eval_sigma(&p(&[1]), &x, &(&id * c), &ctx).unwrap();
        let expected = c.powi(6) * hermite_eval(&p(&[1]), &(&x / c.sqrt()), &ctx).unwrap();
        assert!((scaled - expected).abs() < 1e-10 * expected.abs().max(1.0));
        let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
        assert!((hermite_eval_sigma(&Partition::empty(), &x, &sigma, &ctx).unwrap() - 1.0).abs() < 1e-14);
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            hermite_eval_sigma(&p(&[1]), &x, &bad, &ctx),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn univariate_expansion_special_cases() {
        let mut rng = RngStream::new(4, 4).rng();
        let x = standard_gaussian(1, 4, &mut rng);
        assert_eq!(hermite_univariate_expansion(&p(&[1, 1]), &x).unwrap(), 0.0);
        assert!(hermite_univariate_expansion(&p(&[3]), &x).is_err());
        // at X = 0: H_4(0) = 3, H_2(0) = -1, H_1(0) = 0
        let (ell, n) = (2usize, 3usize);
        let (lf, nf) = (ell as f64, n as f64);
        let expected = (9.0 * lf * nf + 3.0 * lf * (lf - 1.0) * nf + 3.0 * lf * nf * (nf - 1.0)
            + lf * (lf - 1.0) * nf * (nf - 1.0))
            / (12.0 * nf * (nf + 2.0));
        let zero = DMatrix::zeros(ell, n);
        let ctx = MatPolyContext::shared(ell, n, 6).unwrap();
        assert!((hermite_univariate_expansion(&p(&[2]), &zero).unwrap() - expected).abs() < 1e-12);
        assert!((hermite_eval(&p(&[2]), &zero, &ctx).unwrap() - expected).abs() < 1e-12);
    }
}
