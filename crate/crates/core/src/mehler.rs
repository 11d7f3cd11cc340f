//! The Mehler-type operator
//! `O_{t;A} f(X) = E int_{O(n)} f(X H e^{-tA} + X_0 (Id - e^{-2tA})^{1/2}) dH`
//! for diagonal `A >= 0`, and Hermite covariances of correlated matrices
//! `Y = X R + X_0 (Id - R^2)^{1/2}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, sym_apply, sym_eigenvalues};
use crate::matpoly::{normalization, HermitePoly, MatPolyContext};
use crate::partitions::{factorial, gen_pochhammer_unchecked, to_f64, Partition, Rational};
use crate::sampling::{monte_carlo, sample_orthogonal, standard_gaussian, RngStream};
use crate::stats::Estimate;
use crate::zonal::ZonalTable;

/// Time `t >= 0` and the diagonal of `A >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MehlerSpec {
    t: f64,
    a: Vec<f64>,
}

impl MehlerSpec {
    pub fn new(t: f64, a: Vec<f64>) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Unsupported(format!("t must be non-negative, got {t}")));
        }
        if a.is_empty() || a.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Unsupported(format!("diag(A) must be non-empty and non-negative, got {a:?}")));
        }
        Ok(Self { t, a })
    }

    /// Accepts a full matrix but only if it is diagonal.
    pub fn from_matrix(t: f64, a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || (0..a.nrows()).any(|i| (0..a.ncols()).any(|j| i != j && a[(i, j)] != 0.0)) {
            return Err(Error::Unsupported("A must be a diagonal matrix".into()));
        }
        Self::new(t, a.diagonal().iter().copied().collect())
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn diag(&self) -> &[f64] {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Eigenvalues `e^{-2 t a_j}` of `e^{-2tA}`.
    pub fn decay_eigenvalues(&self, t: f64) -> Vec<f64> {
        self.a.iter().map(|a| (-2.0 * t * a).exp()).collect()
    }
}

/// `C_kappa(e^{-2tA}) / C_kappa(Id_n)`.
pub fn eigenvalue_ratio(kappa: &Partition, spec: &MehlerSpec, table: &ZonalTable) -> Result<f64> {
    eigenvalue_ratio_at(kappa, spec, spec.t, table)
}

/// [`eigenvalue_ratio`] at another time.
pub fn eigenvalue_ratio_at(kappa: &Partition, spec: &MehlerSpec, t: f64, table: &ZonalTable) -> Result<f64> {
    let at_id = table.identity_value(kappa, spec.n())?;
    if at_id == Rational::default() {
        return Err(Error::InvalidPartition(format!("({kappa}) has more than n = {} parts", spec.n())));
    }
    Ok(table.eval(kappa, &spec.decay_eigenvalues(t))? / to_f64(&at_id))
}

/// Checks `f(X H) = f(X)` for a few Haar-random `H`.
pub fn check_right_invariance<F>(f: &F, x: &DMatrix<f64>, stream: RngStream) -> Result<()>
where
    F: Fn(&DMatrix<f64>) -> f64,
{
    let mut rng = stream.rng();
    let base = f(x);
    for _ in 0..3 {
        let h = sample_orthogonal(x.ncols(), &mut rng);
        let moved = f(&(x * h));
        if (moved - base).abs() > 1e-8 * (1.0 + base.abs()) {
            return Err(Error::NotInvariant(format!("f(X) = {base}, f(XH) = {moved}")));
        }
    }
    Ok(())
}

/// Monte Carlo `O_{t;A} f(X)`.
pub fn mehler_apply<F>(f: F, x: &DMatrix<f64>, spec: &MehlerSpec, mc_samples: usize, stream: RngStream) -> Result<Estimate>
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    let (ell, n) = (x.nrows(), x.ncols());
    if n != spec.n() {
        return Err(Error::Dimension(format!("X has {n} columns but A is {}x{}", spec.n(), spec.n())));
    }
    check_right_invariance(&f, x, stream.substream(u64::MAX))?;
    let decay = DMatrix::from_diagonal(&DVector::from_iterator(n, spec.decay_eigenvalues(spec.t / 2.0)));
    let noise = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        spec.decay_eigenvalues(spec.t).iter().map(|v| (1.0 - v).max(0.0).sqrt()),
    ));
    let acc = monte_carlo(stream, mc_samples, 1, |rng, out| {
        let h = sample_orthogonal(n, rng);
        let x0 = standard_gaussian(ell, n, rng);
        out[0] = f(&(x * h * &decay + x0 * &noise));
    });
    Ok(acc[0].estimate())
}

/// Symmetric `R` with spectrum in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    r: DMatrix<f64>,
    complement: DMatrix<f64>,
}

impl CorrelationSpec {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        if !is_symmetric(&r, 1e-12) {
            return Err(Error::SpectralRange("R must be symmetric".into()));
        }
        let tol = 1e-12;
        let eig = sym_eigenvalues(&r);
        if let Some(bad) = eig.iter().find(|v| **v < -tol || **v > 1.0 + tol) {
            return Err(Error::SpectralRange(format!("eigenvalue {bad} of R lies outside [0, 1]")));
        }
        let complement = sym_apply(&r, |v| (1.0 - v * v).max(0.0).sqrt());
        Ok(Self { r, complement })
    }

    pub fn rho(n: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::identity(n, n) * rho)
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Eigenvalues of `R^2`.
    pub fn r2_eigenvalues(&self) -> Vec<f64> {
        sym_eigenvalues(&self.r).iter().map(|v| v * v).collect()
    }
}

/// Monte Carlo `E[H_kappa(X) H_sigma(Y)]`.
pub fn correlated_hermite_covariance(
    kappa: &Partition,
    sigma: &Partition,
    spec: &CorrelationSpec,
    ctx: &MatPolyContext,
    mc_samples: usize,
    stream: RngStream,
) -> Result<Estimate> {
    let (ell, n) = (ctx.ell(), ctx.n());
    if spec.r.nrows() != n {
        return Err(Error::Dimension(format!("R must be {n}x{n}")));
    }
    let hk = HermitePoly::new(kappa, ctx)?;
    let hs = HermitePoly::new(sigma, ctx)?;
    let acc = monte_carlo(stream, mc_samples, 1, |rng, out| {
        let x = standard_gaussian(ell, n, rng);
        let x0 = standard_gaussian(ell, n, rng);
        let y = &x * &spec.r + x0 * &spec.complement;
        out[0] = hk.eval(&x).unwrap() * hs.eval(&y).unwrap();
    });
    Ok(acc[0].estimate())
}

/// `1{kappa = sigma} 4^{-k} (n/2)_kappa^{-1} k! C_kappa(R^2) C_kappa(Id_l) / C_kappa(Id_n)`.
pub fn correlated_closed_form(
    kappa: &Partition,
    sigma: &Partition,
    spec: &CorrelationSpec,
    ctx: &MatPolyContext,
) -> Result<f64> {
    if kappa != sigma {
        return Ok(0.0);
    }
    let c = to_f64(&normalization(kappa, ctx).c_kappa);
    if c == 0.0 {
        return Ok(0.0);
    }
    let table = ctx.table();
    Ok(c * table.eval(kappa, &spec.r2_eigenvalues())? / to_f64(&table.identity_value(kappa, ctx.n())?))
}

/// `E[L_kappa(X X^T / 2) L_sigma(Y Y^T / 2)]` for the Laguerre order
/// `(n-l-1)/2`: `1{kappa = sigma} (n/2)_kappa k! C_kappa(R^2) C_kappa(Id_l) / C_kappa(Id_n)`.
pub fn laguerre_correlated_closed_form(
    kappa: &Partition,
    sigma: &Partition,
    spec: &CorrelationSpec,
    ctx: &MatPolyContext,
) -> Result<f64> {
    if kappa != sigma || kappa.len() > ctx.ell() {
        return Ok(0.0);
    }
    let table = ctx.table();
    let scale = gen_pochhammer_unchecked(&ctx.half_n(), kappa)
        * Rational::from_integer(factorial(kappa.weight()))
        * table.identity_value(kappa, ctx.ell())?
        / table.identity_value(kappa, ctx.n())?;
    Ok(to_f64(&scale) * table.eval(kappa, &spec.r2_eigenvalues())?)
}
