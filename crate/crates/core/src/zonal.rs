//! Exact zonal polynomial tables.
//!
//! `C_kappa` is built from the Jack polynomial with parameter 2 (monomial
//! basis, dominance-order recurrence, unit leading coefficient) and then
//! rescaled so that `sum_{kappa |- k} C_kappa = t_1^k`. Generalized binomial
//! coefficients and linearization coefficients are derived from the tables
//! by exact change of basis.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::{enumerate_partitions, factorial, gen_pochhammer_unchecked, int, Partition, Rational};
use crate::symfun::{
    monomial_to_powersum, power_sums, shift_variables, sym_multiply, CompiledPowerSum, PowerSumPoly, SymPoly,
};

/// Bumped whenever the on-disk layout or the construction changes.
pub const CACHE_VERSION: u32 = 1;

/// Default table size for the command-line tools.
pub const DEFAULT_MAX_DEGREE: usize = 8;

/// One zonal polynomial in both bases.
#[derive(Clone, Debug)]
pub struct ZonalEntry {
    pub kappa: Partition,
    pub monomial: SymPoly,
    pub powersum: PowerSumPoly,
    compiled: CompiledPowerSum,
}

impl ZonalEntry {
    fn new(kappa: Partition, monomial: SymPoly) -> Self {
        let powersum = monomial_to_powersum(&monomial, kappa.weight().max(1))
            .expect("a degree-k polynomial converts on k variables");
        let compiled = powersum.compile();
        Self { kappa, monomial, powersum, compiled }
    }
}

/// Zonal polynomials up to `max_degree`, with the generalized binomial and
/// linearization tensors.
#[derive(Clone, Debug)]
pub struct ZonalTable {
    max_degree: usize,
    /// `degrees[k]` lists `C_kappa` for `kappa |- k` in reverse lexicographic order.
    degrees: Vec<Vec<ZonalEntry>>,
    index: HashMap<Partition, (usize, usize)>,
    binomials: BTreeMap<Partition, BTreeMap<Partition, Rational>>,
    linearization: BTreeMap<(Partition, Partition), BTreeMap<Partition, Rational>>,
}

/// Jack polynomial with parameter 2 and unit coefficient on `m_kappa`.
fn jack2_monic(kappa: &Partition) -> SymPoly {
    let k = kappa.weight();
    let rho = |p: &Partition| -> BigInt {
        p.parts()
            .iter()
            .enumerate()
            .map(|(i, &x)| BigInt::from(x as i64) * BigInt::from(x as i64 - (i as i64 + 1)))
            .sum()
    };
    let rho_kappa = rho(kappa);
    let mut coef: BTreeMap<Partition, Rational> = BTreeMap::new();
    coef.insert(kappa.clone(), Rational::one());
    // reverse lexicographic order visits every mu that dominates lambda first
    for lambda in enumerate_partitions(k, k) {
        if lambda >= *kappa || !kappa.dominates(&lambda) {
            continue;
        }
        let parts = lambda.parts();
        let mut acc = Rational::zero();
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                for t in 1..=parts[j] {
                    let mut moved = parts.to_vec();
                    moved[i] += t;
                    moved[j] -= t;
                    let mu = Partition::from_unsorted(moved);
                    if let Some(c) = coef.get(&mu) {
                        let weight = parts[i] as i64 - parts[j] as i64 + 2 * t as i64;
                        acc += c * int(weight);
                    }
                }
            }
        }
        if !acc.is_zero() {
            let gap = &rho_kappa - rho(&lambda);
            coef.insert(lambda, acc / Rational::from_integer(gap));
        }
    }
    SymPoly::from_terms(coef)
}

/// Zonal polynomials of degree `k` in reverse lexicographic order.
fn zonal_degree(k: usize) -> Vec<(Partition, SymPoly)> {
    let partitions = enumerate_partitions(k, k.max(1));
    let jacks: Vec<SymPoly> = partitions.iter().map(jack2_monic).collect();
    // coefficient of m_lambda in t_1^k is the multinomial k! / prod lambda_i!
    let multinomial = |lambda: &Partition| -> Rational {
        let den: BigInt = lambda.parts().iter().map(|&p| factorial(p as usize)).product();
        Rational::new(factorial(k), den)
    };
    let mut scales: Vec<Rational> = Vec::with_capacity(partitions.len());
    for (i, kappa) in partitions.iter().enumerate() {
        let mut target = multinomial(kappa);
        for (j, jack) in jacks.iter().enumerate().take(i) {
            target -= &scales[j] * jack.coefficient(kappa);
        }
        scales.push(target);
    }
    partitions
        .into_iter()
        .zip(jacks)
        .zip(scales)
        .map(|((kappa, jack), scale)| (kappa, jack.scale(&scale)))
        .collect()
}

/// `C_kappa(Id_m)` from the closed form
/// `2^{2k} k! (m/2)_kappa prod_{i<j} (2k_i - 2k_j - i + j) / prod_j (2k_j + p - j)!`.
pub fn zonal_identity_value(kappa: &Partition, m: usize) -> Rational {
    let k = kappa.weight();
    let p = kappa.len();
    let parts = kappa.parts();
    let mut value = Rational::from_integer(BigInt::from(4).pow(k as u32) * factorial(k));
    value *= gen_pochhammer_unchecked(&Rational::new(BigInt::from(m), BigInt::from(2)), kappa);
    for i in 0..p {
        for j in i + 1..p {
            value *= int(2 * parts[i] as i64 - 2 * parts[j] as i64 - i as i64 + j as i64);
        }
    }
    for (j, &kj) in parts.iter().enumerate() {
        value /= Rational::from_integer(factorial(2 * kj as usize + p - j - 1));
    }
    value
}

/// `m_lambda(1, ..., 1)` on `m` variables.
fn monomial_at_identity(lambda: &Partition, m: usize) -> BigInt {
    if lambda.len() > m {
        return BigInt::zero();
    }
    let mut den = factorial(m - lambda.len());
    for &mult in &lambda.multiplicities() {
        den *= factorial(mult);
    }
    factorial(m) / den
}

/// Expands `p` in the basis `{C_sigma}` by peeling off leading monomials.
/// Only monomials with at most `num_vars` parts are kept on each side, so
/// the result is the expansion valid on `num_vars` variables.
fn expand_in_zonal(
    p: &SymPoly,
    num_vars: usize,
    zonal: impl Fn(&Partition) -> SymPoly,
) -> BTreeMap<Partition, Rational> {
    let mut rest = p.restrict(num_vars);
    let mut out = BTreeMap::new();
    while let Some(sigma) = rest
        .terms()
        .keys()
        .max_by(|a, b| a.weight().cmp(&b.weight()).then(a.cmp(b)))
        .cloned()
    {
        let c_sigma = zonal(&sigma).restrict(num_vars);
        let coef = rest.coefficient(&sigma) / c_sigma.coefficient(&sigma);
        rest = &rest - &c_sigma.scale(&coef);
        out.insert(sigma, coef);
    }
    out
}

impl ZonalTable {
    /// Builds every table up to `max_degree`, including all binomial and
    /// linearization coefficients.
    pub fn build(max_degree: usize) -> Self {
        let degrees: Vec<Vec<ZonalEntry>> = (0..=max_degree)
            .map(|k| zonal_degree(k).into_iter().map(|(kappa, poly)| ZonalEntry::new(kappa, poly)).collect())
            .collect();
        let mut table = Self::from_degrees(max_degree, degrees);
        table.binomials = table.compute_binomials();
        table.linearization = table.compute_linearization();
        table
    }

    fn from_degrees(max_degree: usize, degrees: Vec<Vec<ZonalEntry>>) -> Self {
        let index = degrees
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().enumerate().map(move |(i, e)| (e.kappa.clone(), (k, i))))
            .collect();
        Self {
            max_degree,
            degrees,
            index,
            binomials: BTreeMap::new(),
            linearization: BTreeMap::new(),
        }
    }

    /// A process-wide shared table holding at least `max_degree`.
    pub fn shared(max_degree: usize) -> Arc<ZonalTable> {
        static SHARED: OnceLock<Mutex<Option<Arc<ZonalTable>>>> = OnceLock::new();
        let slot = SHARED.get_or_init(|| Mutex::new(None));
        let mut guard = slot.lock().unwrap();
        if let Some(t) = guard.as_ref() {
            if t.max_degree >= max_degree {
                return t.clone();
            }
        }
        let table = Arc::new(ZonalTable::build(max_degree));
        *guard = Some(table.clone());
        table
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Partitions of weight `k` in table order.
    pub fn partitions(&self, k: usize) -> Vec<Partition> {
        self.degrees.get(k).map(|row| row.iter().map(|e| e.kappa.clone()).collect()).unwrap_or_default()
    }

    pub fn entry(&self, kappa: &Partition) -> Result<&ZonalEntry> {
        match self.index.get(kappa) {
            Some(&(k, i)) => Ok(&self.degrees[k][i]),
            None => Err(Error::TableTooSmall { needed: kappa.weight(), have: self.max_degree }),
        }
    }

    /// `C_kappa` in the monomial basis.
    pub fn monomial(&self, kappa: &Partition) -> Result<&SymPoly> {
        Ok(&self.entry(kappa)?.monomial)
    }

    /// `C_kappa` in the power-sum basis.
    pub fn powersum(&self, kappa: &Partition) -> Result<&PowerSumPoly> {
        Ok(&self.entry(kappa)?.powersum)
    }

    pub(crate) fn compiled(&self, kappa: &Partition) -> Result<&CompiledPowerSum> {
        Ok(&self.entry(kappa)?.compiled)
    }

    /// `C_kappa(S)` from the eigenvalues of `S`.
    pub fn eval(&self, kappa: &Partition, eigenvalues: &[f64]) -> Result<f64> {
        let compiled = self.compiled(kappa)?;
        Ok(compiled.eval(&power_sums(eigenvalues, compiled.degree())))
    }

    /// `C_kappa(S)` from precomputed power sums `t_1, t_2, ...`.
    pub fn eval_power_sums(&self, kappa: &Partition, power_sums: &[f64]) -> Result<f64> {
        Ok(self.compiled(kappa)?.eval(power_sums))
    }

    /// `C_kappa(Id_m)` by evaluating the monomial table at `(1, ..., 1)`.
    pub fn identity_value(&self, kappa: &Partition, m: usize) -> Result<Rational> {
        let poly = self.monomial(kappa)?;
        Ok(poly
            .terms()
            .iter()
            .map(|(lambda, c)| c * Rational::from_integer(monomial_at_identity(lambda, m)))
            .sum())
    }

    /// Generalized binomial coefficients by expanding
    /// `C_kappa(S + Id_l) / C_kappa(Id_l)` over `C_sigma(S) / C_sigma(Id_l)`
    /// on exactly `num_vars = l` variables.
    pub fn binomials_at(&self, kappa: &Partition, num_vars: usize) -> Result<BTreeMap<Partition, Rational>> {
        if num_vars < kappa.len() {
            return Err(Error::Rank { needed: kappa.len(), num_vars });
        }
        let shifted = shift_variables(self.monomial(kappa)?, num_vars);
        let c_kappa = self.identity_value(kappa, num_vars)?;
        let expansion = expand_in_zonal(&shifted, num_vars, |s| self.monomial(s).expect("lower degree").clone());
        let mut out = BTreeMap::new();
        for (sigma, coef) in expansion {
            let value = coef * self.identity_value(&sigma, num_vars)? / &c_kappa;
            out.insert(sigma, value);
        }
        Ok(out)
    }

    fn compute_binomials(&self) -> BTreeMap<Partition, BTreeMap<Partition, Rational>> {
        self.degrees
            .iter()
            .flatten()
            .map(|e| {
                let vars = e.kappa.len().max(1);
                (e.kappa.clone(), self.binomials_at(&e.kappa, vars).expect("kappa is in the table"))
            })
            .collect()
    }

    /// `(kappa choose sigma)`; zero when `sigma` is not contained in `kappa`.
    pub fn binomial(&self, kappa: &Partition, sigma: &Partition) -> Result<Rational> {
        let row = self
            .binomials
            .get(kappa)
            .ok_or(Error::TableTooSmall { needed: kappa.weight(), have: self.max_degree })?;
        Ok(row.get(sigma).cloned().unwrap_or_else(Rational::zero))
    }

    /// All non-zero `(kappa choose sigma)`, ordered by `sigma`.
    pub fn binomials(&self, kappa: &Partition) -> Result<&BTreeMap<Partition, Rational>> {
        self.binomials
            .get(kappa)
            .ok_or(Error::TableTooSmall { needed: kappa.weight(), have: self.max_degree })
    }

    fn compute_linearization(&self) -> BTreeMap<(Partition, Partition), BTreeMap<Partition, Rational>> {
        let mut out = BTreeMap::new();
        let all: Vec<&ZonalEntry> = self.degrees.iter().flatten().collect();
        for (i, a) in all.iter().enumerate() {
            for b in all.iter().take(i + 1) {
                if a.kappa.weight() + b.kappa.weight() > self.max_degree {
                    continue;
                }
                let product = sym_multiply(&a.monomial, &b.monomial);
                let num_vars = product.max_length().max(1);
                let coeffs = expand_in_zonal(&product, num_vars, |s| self.monomial(s).expect("in table").clone());
                out.insert(Self::pair_key(&a.kappa, &b.kappa), coeffs);
            }
        }
        out
    }

    fn pair_key(tau: &Partition, sigma: &Partition) -> (Partition, Partition) {
        if tau >= sigma {
            (tau.clone(), sigma.clone())
        } else {
            (sigma.clone(), tau.clone())
        }
    }

    /// Linearization coefficients `a^kappa_{tau,sigma}` of `C_tau C_sigma`.
    pub fn linearization(&self, tau: &Partition, sigma: &Partition) -> Result<&BTreeMap<Partition, Rational>> {
        self.linearization.get(&Self::pair_key(tau, sigma)).ok_or(Error::TableTooSmall {
            needed: tau.weight() + sigma.weight(),
            have: self.max_degree,
        })
    }

    /// Writes the table as versioned JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TableFile {
            version: CACHE_VERSION,
            max_degree: self.max_degree,
            zonal: self
                .degrees
                .iter()
                .flatten()
                .map(|e| TableRow { kappa: e.kappa.clone(), monomial: encode_map(e.monomial.terms()) })
                .collect(),
            binomials: self
                .binomials
                .iter()
                .map(|(k, row)| TableRow { kappa: k.clone(), monomial: encode_map(row) })
                .collect(),
            linearization: self
                .linearization
                .iter()
                .map(|((t, s), row)| LinearizationRow { tau: t.clone(), sigma: s.clone(), kappa: encode_map(row) })
                .collect(),
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(&file)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a table written by [`ZonalTable::save`]; files from another
    /// cache version are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let file: TableFile = serde_json::from_slice(&fs::read(path)?)?;
        if file.version != CACHE_VERSION {
            return Err(Error::Cache(format!(
                "{} has version {}, expected {}",
                path.display(),
                file.version,
                CACHE_VERSION
            )));
        }
        let mut degrees: Vec<Vec<ZonalEntry>> = vec![Vec::new(); file.max_degree + 1];
        for row in file.zonal {
            let k = row.kappa.weight();
            if k > file.max_degree {
                return Err(Error::Cache(format!("row ({}) exceeds max degree", row.kappa)));
            }
            degrees[k].push(ZonalEntry::new(row.kappa, SymPoly::from_terms(decode_map(&row.monomial)?)));
        }
        for (k, row) in degrees.iter().enumerate() {
            let expected = enumerate_partitions(k, k.max(1));
            if row.iter().map(|e| &e.kappa).ne(expected.iter()) {
                return Err(Error::Cache(format!("degree {k} rows are incomplete or out of order")));
            }
        }
        let mut table = Self::from_degrees(file.max_degree, degrees);
        for row in file.binomials {
            table.binomials.insert(row.kappa, decode_map(&row.monomial)?);
        }
        for row in file.linearization {
            table.linearization.insert((row.tau, row.sigma), decode_map(&row.kappa)?);
        }
        Ok(table)
    }

    /// Loads `dir/zonal-v{version}-deg{max_degree}.json` if present, otherwise
    /// builds the table and writes it there.
    pub fn load_or_build(dir: &Path, max_degree: usize) -> Result<Self> {
        let path = cache_path(dir, max_degree);
        if path.exists() {
            if let Ok(t) = Self::load(&path) {
                return Ok(t);
            }
        }
        let table = Self::build(max_degree);
        table.save(&path)?;
        Ok(table)
    }
}

/// File name used by [`ZonalTable::load_or_build`].
pub fn cache_path(dir: &Path, max_degree: usize) -> PathBuf {
    dir.join(format!("zonal-v{CACHE_VERSION}-deg{max_degree}.json"))
}

/// `C_kappa(S)` from the eigenvalues of `S`, using the shared table.
pub fn zonal_eval(kappa: &Partition, eigenvalues: &[f64]) -> Result<f64> {
    ZonalTable::shared(kappa.weight().max(6)).eval(kappa, eigenvalues)
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    version: u32,
    max_degree: usize,
    zonal: Vec<TableRow>,
    binomials: Vec<TableRow>,
    linearization: Vec<LinearizationRow>,
}

/// A rational as decimal numerator and denominator strings.
#[derive(Serialize, Deserialize)]
struct ExactEntry {
    key: Partition,
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct TableRow {
    kappa: Partition,
    monomial: Vec<ExactEntry>,
}

#[derive(Serialize, Deserialize)]
struct LinearizationRow {
    tau: Partition,
    sigma: Partition,
    kappa: Vec<ExactEntry>,
}

fn encode_map(map: &BTreeMap<Partition, Rational>) -> Vec<ExactEntry> {
    map.iter()
        .map(|(k, v)| ExactEntry { key: k.clone(), num: v.numer().to_string(), den: v.denom().to_string() })
        .collect()
}

fn decode_map(entries: &[ExactEntry]) -> Result<BTreeMap<Partition, Rational>> {
    entries
        .iter()
        .map(|e| {
            let num: BigInt = e.num.parse().map_err(|_| Error::Cache(format!("bad numerator {:?}", e.num)))?;
            let den: BigInt = e.den.parse().map_err(|_| Error::Cache(format!("bad denominator {:?}", e.den)))?;
            if den.is_zero() {
                return Err(Error::Cache("zero denominator".into()));
            }
            Ok((e.key.clone(), Rational::new(num, den)))
        })
        .collect()
}
