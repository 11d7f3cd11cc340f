//! Exact symmetric polynomials in the monomial basis `m_lambda` and in the
//! power-sum basis `t_nu = prod_s t_s^{nu_s}`.
//!
//! A [`SymPoly`] lives in the stable ring of symmetric functions: it does not
//! carry a variable count. Operations that genuinely depend on the number of
//! variables (shifting every variable by a constant, which is how
//! `C(S + Id)` is computed) take it explicitly and are only valid for it.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::partitions::{binomial, enumerate_partitions, to_f64, Partition, Rational};

/// Symmetric polynomial `sum_lambda c_lambda m_lambda` with exact coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymPoly {
    terms: BTreeMap<Partition, Rational>,
}

/// Polynomial in the power sums `t_s = sum_i x_i^s`; the key `nu` stands for
/// `prod_i t_{nu_i}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PowerSumPoly {
    terms: BTreeMap<Partition, Rational>,
}

fn insert_term(terms: &mut BTreeMap<Partition, Rational>, key: Partition, value: Rational) {
    if value.is_zero() {
        return;
    }
    match terms.entry(key) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(value);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            *o.get_mut() += value;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

impl SymPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(Partition::empty(), c)
    }

    /// `c * m_lambda`.
    pub fn monomial(lambda: Partition, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        insert_term(&mut terms, lambda, c);
        Self { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Partition, Rational)>>(iter: I) -> Self {
        let mut terms = BTreeMap::new();
        for (k, v) in iter {
            insert_term(&mut terms, k, v);
        }
        Self { terms }
    }

    pub fn terms(&self) -> &BTreeMap<Partition, Rational> {
        &self.terms
    }

    pub fn coefficient(&self, lambda: &Partition) -> Rational {
        self.terms.get(lambda).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest weight among the stored monomials.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Partition::weight).max().unwrap_or(0)
    }

    /// Longest key partition, i.e. the fewest variables on which every
    /// stored monomial is non-zero.
    pub fn max_length(&self) -> usize {
        self.terms.keys().map(Partition::len).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_terms(self.terms.iter().map(|(k, v)| (k.clone(), v * c)))
    }

    /// Drops monomials with more than `num_vars` parts (they vanish on
    /// `num_vars` variables).
    pub fn restrict(&self, num_vars: usize) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(k, _)| k.len() <= num_vars)
                .map(|(k, v)| (k.clone(), v.clone())),
        )
    }

    /// Evaluates `sum c_lambda m_lambda(x)`; monomials with more parts than
    /// variables contribute zero.
    pub fn eval_monomial_basis(&self, eigenvalues: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(lambda, c)| to_f64(c) * eval_monomial(lambda, eigenvalues))
            .sum()
    }

    /// Exact evaluation at rational points.
    pub fn eval_exact(&self, point: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (lambda, c) in &self.terms {
            if lambda.len() > point.len() {
                continue;
            }
            let mut m = Rational::zero();
            for alpha in distinct_permutations(&padded(lambda, point.len())) {
                let mut term = Rational::one();
                for (x, &e) in point.iter().zip(&alpha) {
                    term *= num_traits::pow(x.clone(), e as usize);
                }
                m += term;
            }
            acc += c * m;
        }
        acc
    }
}

impl Add for &SymPoly {
    type Output = SymPoly;

    fn add(self, rhs: &SymPoly) -> SymPoly {
        let mut terms = self.terms.clone();
        for (k, v) in &rhs.terms {
            insert_term(&mut terms, k.clone(), v.clone());
        }
        SymPoly { terms }
    }
}

impl Sub for &SymPoly {
    type Output = SymPoly;

    fn sub(self, rhs: &SymPoly) -> SymPoly {
        self + &(-rhs)
    }
}

impl Neg for &SymPoly {
    type Output = SymPoly;

    fn neg(self) -> SymPoly {
        SymPoly::from_terms(self.terms.iter().map(|(k, v)| (k.clone(), -v)))
    }
}

impl Mul for &SymPoly {
    type Output = SymPoly;

    fn mul(self, rhs: &SymPoly) -> SymPoly {
        sym_multiply(self, rhs)
    }
}

/// `lambda` padded with zeros to `n` entries.
fn padded(lambda: &Partition, n: usize) -> Vec<u32> {
    let mut v = lambda.parts().to_vec();
    v.resize(n, 0);
    v
}

/// Distinct permutations of a multiset, in lexicographic order.
pub(crate) fn distinct_permutations(items: &[u32]) -> Vec<Vec<u32>> {
    let mut current = items.to_vec();
    current.sort_unstable();
    let mut out = vec![current.clone()];
    loop {
        // next lexicographic permutation
        let n = current.len();
        if n < 2 {
            break;
        }
        let mut i = n - 1;
        while i > 0 && current[i - 1] >= current[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while current[j] <= current[i - 1] {
            j -= 1;
        }
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
    out
}

/// Number of distinct arrangements of `lambda` (padded with zeros) in `n` slots.
fn arrangement_count(lambda: &Partition, n: usize) -> BigInt {
    if lambda.len() > n {
        return BigInt::zero();
    }
    let mut denom = crate::partitions::factorial(n - lambda.len());
    for &m in &lambda.multiplicities() {
        denom *= crate::partitions::factorial(m);
    }
    crate::partitions::factorial(n) / denom
}

/// `m_lambda(x)` in floating point.
pub fn eval_monomial(lambda: &Partition, x: &[f64]) -> f64 {
    if lambda.len() > x.len() {
        return 0.0;
    }
    if lambda.is_empty() {
        return 1.0;
    }
    distinct_permutations(&padded(lambda, x.len()))
        .iter()
        .map(|alpha| {
            x.iter()
                .zip(alpha)
                .map(|(&xi, &e)| xi.powi(e as i32))
                .product::<f64>()
        })
        .sum()
}

type ProductCache = Mutex<HashMap<(Partition, Partition), Arc<Vec<(Partition, BigInt)>>>>;

fn product_cache() -> &'static ProductCache {
    static CACHE: OnceLock<ProductCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Integer structure constants of `m_lambda * m_mu` in the stable ring.
///
/// With `N = len(lambda) + len(mu)` variables (enough for every monomial of
/// the product) the coefficient of `m_nu` is
/// `#arr(lambda) * #{beta in arr(mu) : lambda + beta in arr(nu)} / #arr(nu)`.
fn monomial_product(lambda: &Partition, mu: &Partition) -> Arc<Vec<(Partition, BigInt)>> {
    let key = if lambda <= mu { (lambda.clone(), mu.clone()) } else { (mu.clone(), lambda.clone()) };
    if let Some(hit) = product_cache().lock().unwrap().get(&key) {
        return hit.clone();
    }
    let (a, b) = &key;
    let n = a.len() + b.len();
    let base = padded(a, n);
    let mut hits: BTreeMap<Partition, BigInt> = BTreeMap::new();
    for beta in distinct_permutations(&padded(b, n)) {
        let sum: Vec<u32> = base.iter().zip(&beta).map(|(x, y)| x + y).collect();
        *hits.entry(Partition::from_unsorted(sum)).or_insert_with(BigInt::zero) += 1;
    }
    let arr_a = arrangement_count(a, n);
    let result: Vec<(Partition, BigInt)> = hits
        .into_iter()
        .map(|(nu, count)| {
            let c = &arr_a * count / arrangement_count(&nu, n);
            (nu, c)
        })
        .collect();
    let result = Arc::new(result);
    product_cache().lock().unwrap().insert(key, result.clone());
    result
}

/// Exact product in the monomial basis; degrees add.
pub fn sym_multiply(p: &SymPoly, q: &SymPoly) -> SymPoly {
    let mut terms = BTreeMap::new();
    for (lambda, a) in &p.terms {
        for (mu, b) in &q.terms {
            let ab = a * b;
            for (nu, c) in monomial_product(lambda, mu).iter() {
                insert_term(&mut terms, nu.clone(), &ab * Rational::from_integer(c.clone()));
            }
        }
    }
    SymPoly { terms }
}

/// `q(s_1, ..., s_m) = p(s_1 + 1, ..., s_m + 1)` on exactly `num_vars = m`
/// variables.
pub fn shift_variables(p: &SymPoly, num_vars: usize) -> SymPoly {
    shift_variables_by(p, num_vars, &Rational::one())
}

/// `q(s) = p(s_1 + c, ..., s_m + c)` on `num_vars` variables.
pub fn shift_variables_by(p: &SymPoly, num_vars: usize, c: &Rational) -> SymPoly {
    let mut terms = BTreeMap::new();
    for (lambda, coef) in &p.terms {
        if lambda.len() > num_vars {
            continue;
        }
        // expand prod_i (s_i + c)^{alpha_i} over arrangements alpha and keep
        // only non-increasing exponent vectors: those are the m_mu leaders
        for alpha in distinct_permutations(&padded(lambda, num_vars)) {
            let mut beta = vec![0u32; num_vars];
            loop {
                if beta.windows(2).all(|w| w[0] >= w[1]) {
                    let mut weight = Rational::one();
                    for (&a, &b) in alpha.iter().zip(&beta) {
                        weight *= Rational::from_integer(binomial(a as usize, b as usize));
                        weight *= num_traits::pow(c.clone(), (a - b) as usize);
                    }
                    insert_term(&mut terms, Partition::from_unsorted(beta.clone()), coef * weight);
                }
                // odometer over 0 <= beta_i <= alpha_i
                let mut i = 0;
                while i < num_vars {
                    if beta[i] < alpha[i] {
                        beta[i] += 1;
                        break;
                    }
                    beta[i] = 0;
                    i += 1;
                }
                if i == num_vars {
                    break;
                }
            }
        }
    }
    SymPoly { terms }
}

/// Exact Gauss-Jordan solve of `A x = b` for each column of `b`.
/// Returns `None` if `A` is singular.
pub(crate) fn solve_exact(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut aug: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| row.iter().chain(rhs.iter()).cloned().collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot);
        let inv = Rational::one() / &aug[col][col];
        for x in aug[col].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= &factor * p;
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..n + m].to_vec()).collect())
}

/// Degree-`k` power sums expressed in the monomial basis, and the inverse map.
#[derive(Debug)]
pub(crate) struct PowerSumBasis {
    pub partitions: Vec<Partition>,
    /// `power_in_monomial[i][j]`: coefficient of `m_{partitions[j]}` in `t_{partitions[i]}`.
    pub power_in_monomial: Vec<Vec<Rational>>,
    /// `monomial_in_power[i][j]`: coefficient of `t_{partitions[j]}` in `m_{partitions[i]}`.
    pub monomial_in_power: Vec<Vec<Rational>>,
}

fn power_sum_basis(k: usize) -> Arc<PowerSumBasis> {
    type Cache = Mutex<HashMap<usize, Arc<PowerSumBasis>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&k) {
        return hit.clone();
    }
    let partitions = enumerate_partitions(k, k.max(1));
    let index: HashMap<&Partition, usize> = partitions.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let power_in_monomial: Vec<Vec<Rational>> = partitions
        .iter()
        .map(|nu| {
            let poly = nu.parts().iter().fold(SymPoly::one(), |acc, &s| {
                sym_multiply(&acc, &SymPoly::monomial(Partition::row(s), Rational::one()))
            });
            let mut row = vec![Rational::zero(); partitions.len()];
            for (lambda, c) in poly.terms() {
                row[index[lambda]] = c.clone();
            }
            row
        })
        .collect();
    // M_in_P = (P_in_M)^{-1}
    let identity: Vec<Vec<Rational>> = (0..partitions.len())
        .map(|i| {
            (0..partitions.len())
                .map(|j| if i == j { Rational::one() } else { Rational::zero() })
                .collect()
        })
        .collect();
    let transposed: Vec<Vec<Rational>> = (0..partitions.len())
        .map(|j| power_in_monomial.iter().map(|row| row[j].clone()).collect())
        .collect();
    // solve P^T X = I  =>  X = (P^T)^{-1} = (P^{-1})^T
    let inv_t = solve_exact(&transposed, &identity).expect("power sums form a basis");
    let monomial_in_power = (0..partitions.len())
        .map(|i| (0..partitions.len()).map(|j| inv_t[j][i].clone()).collect())
        .collect();
    let basis = Arc::new(PowerSumBasis { partitions, power_in_monomial, monomial_in_power });
    cache.lock().unwrap().insert(k, basis.clone());
    basis
}

/// Exact change of basis from monomials to power sums, valid on `num_vars`
/// variables.
pub fn monomial_to_powersum(p: &SymPoly, num_vars: usize) -> Result<PowerSumPoly> {
    let needed = p.max_length();
    if needed > num_vars {
        return Err(Error::Rank { needed, num_vars });
    }
    let mut terms = BTreeMap::new();
    for (lambda, c) in &p.terms {
        let basis = power_sum_basis(lambda.weight());
        let i = basis.partitions.iter().position(|q| q == lambda).expect("partition of its own weight");
        for (j, nu) in basis.partitions.iter().enumerate() {
            insert_term(&mut terms, nu.clone(), c * &basis.monomial_in_power[i][j]);
        }
    }
    Ok(PowerSumPoly { terms })
}

/// Inverse of [`monomial_to_powersum`].
pub fn powersum_to_monomial(q: &PowerSumPoly) -> SymPoly {
    let mut terms = BTreeMap::new();
    for (nu, c) in &q.terms {
        let basis = power_sum_basis(nu.weight());
        let i = basis.partitions.iter().position(|p| p == nu).expect("partition of its own weight");
        for (j, lambda) in basis.partitions.iter().enumerate() {
            insert_term(&mut terms, lambda.clone(), c * &basis.power_in_monomial[i][j]);
        }
    }
    SymPoly { terms }
}

impl PowerSumPoly {
    pub fn from_terms<I: IntoIterator<Item = (Partition, Rational)>>(iter: I) -> Self {
        let mut terms = BTreeMap::new();
        for (k, v) in iter {
            insert_term(&mut terms, k, v);
        }
        Self { terms }
    }

    pub fn terms(&self) -> &BTreeMap<Partition, Rational> {
        &self.terms
    }

    pub fn coefficient(&self, nu: &Partition) -> Rational {
        self.terms.get(nu).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Partition::weight).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_terms(self.terms.iter().map(|(k, v)| (k.clone(), v * c)))
    }

    pub fn add(&self, other: &PowerSumPoly) -> Self {
        Self::from_terms(self.terms.iter().chain(other.terms.iter()).map(|(k, v)| (k.clone(), v.clone())))
    }

    /// Evaluates with `power_sums[s - 1] = t_s`.
    pub fn eval_power_sums(&self, power_sums: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(nu, c)| to_f64(c) * nu.parts().iter().map(|&s| power_sums[s as usize - 1]).product::<f64>())
            .sum()
    }

    pub fn eval_eigenvalues(&self, eigenvalues: &[f64]) -> f64 {
        self.eval_power_sums(&power_sums(eigenvalues, self.degree()))
    }

    /// Floating-point copy for hot evaluation loops.
    pub fn compile(&self) -> CompiledPowerSum {
        CompiledPowerSum {
            degree: self.degree(),
            terms: self
                .terms
                .iter()
                .map(|(nu, c)| (to_f64(c), nu.parts().iter().map(|&s| s as usize - 1).collect()))
                .collect(),
        }
    }
}

/// `t_1, ..., t_max` of an eigenvalue list.
pub fn power_sums(eigenvalues: &[f64], max: usize) -> Vec<f64> {
    let mut out = vec![0.0; max];
    for &x in eigenvalues {
        let mut p = 1.0;
        for t in out.iter_mut() {
            p *= x;
            *t += p;
        }
    }
    out
}

/// A power-sum polynomial with `f64` coefficients.
#[derive(Clone, Debug)]
pub struct CompiledPowerSum {
    degree: usize,
    terms: Vec<(f64, Vec<usize>)>,
}

impl CompiledPowerSum {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Evaluates with `power_sums[s - 1] = t_s`.
    pub fn eval(&self, power_sums: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, idx)| c * idx.iter().map(|&i| power_sums[i]).product::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::{int, ratio};

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    fn m(parts: &[u32]) -> SymPoly {
        SymPoly::monomial(p(parts), int(1))
    }

    #[test]
    fn multiplication_examples() {
        let sq = sym_multiply(&m(&[1]), &m(&[1]));
        assert_eq!(sq, SymPoly::from_terms([(p(&[2]), int(1)), (p(&[1, 1]), int(2))]));
        assert_eq!(sym_multiply(&m(&[1]), &m(&[2])), SymPoly::from_terms([(p(&[3]), int(1)), (p(&[2, 1]), int(1))]));
        let x = &m(&[2, 1]) + &m(&[1]).scale(&ratio(3, 7));
        assert_eq!(sym_multiply(&x, &SymPoly::one()), x);
        // m_(1,1)^2 = m_(2,2) + 2 m_(2,1,1) + 6 m_(1,1,1,1)
        let expected = SymPoly::from_terms([(p(&[2, 2]), int(1)), (p(&[2, 1, 1]), int(2)), (p(&[1, 1, 1, 1]), int(6))]);
        assert_eq!(sym_multiply(&m(&[1, 1]), &m(&[1, 1])), expected);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(m(&[1]).eval_monomial_basis(&[2.0, 3.0]), 5.0);
        assert_eq!(m(&[1, 1]).eval_monomial_basis(&[2.0, 3.0]), 6.0);
        assert_eq!(m(&[2]).eval_monomial_basis(&[2.0]), 4.0);
        // longer monomials vanish on fewer variables
        assert_eq!(m(&[1, 1, 1]).eval_monomial_basis(&[2.0, 3.0]), 0.0);
    }

    #[test]
    fn shift_examples() {
        // m_(1) on 3 variables shifts to m_(1) + 3
        let shifted = shift_variables(&m(&[1]), 3);
        assert_eq!(shifted, SymPoly::from_terms([(p(&[1]), int(1)), (Partition::empty(), int(3))]));
        assert_eq!(shift_variables(&SymPoly::constant(ratio(2, 5)), 4), SymPoly::constant(ratio(2, 5)));
        let shifted = shift_variables(&m(&[2]), 2);
        assert_eq!(shifted.eval_monomial_basis(&[0.0, 0.0]), 2.0);
    }

    #[test]
    fn powersum_examples() {
        let t = |parts: &[u32]| PowerSumPoly::from_terms([(p(parts), int(1))]);
        assert_eq!(monomial_to_powersum(&m(&[1]), 1).unwrap(), t(&[1]));
        assert_eq!(monomial_to_powersum(&m(&[2]), 1).unwrap(), t(&[2]));
        let newton = PowerSumPoly::from_terms([(p(&[1, 1]), ratio(1, 2)), (p(&[2]), ratio(-1, 2))]);
        assert_eq!(monomial_to_powersum(&m(&[1, 1]), 2).unwrap(), newton);
        assert!(matches!(monomial_to_powersum(&m(&[1, 1]), 1), Err(Error::Rank { needed: 2, num_vars: 1 })));
    }

    #[test]
    fn basis_round_trip_to_degree_six() {
        for k in 0..=6 {
            for lambda in enumerate_partitions(k, k.max(1)) {
                let poly = m(lambda.parts());
                let there = monomial_to_powersum(&poly, k.max(1)).unwrap();
                assert_eq!(powersum_to_monomial(&there), poly, "lambda = {lambda}");
            }
        }
    }

    #[test]
    fn shift_inverse_is_identity() {
        let poly = SymPoly::from_terms([(p(&[3, 1]), ratio(2, 3)), (p(&[2]), int(-1)), (p(&[1, 1, 1]), int(5))]);
        for vars in 3..=5 {
            let there = shift_variables(&poly, vars);
            let back = shift_variables_by(&there, vars, &int(-1));
            assert_eq!(back, poly);
        }
    }

    /// Brute-force expansion: evaluate the product of the two expanded
    /// polynomials on integer points and compare with the basis product.
    #[test]
    fn product_matches_pointwise_evaluation() {
        let points: Vec<Vec<Rational>> = vec![
            vec![int(1), int(2), int(-1), int(3)],
            vec![ratio(1, 2), int(0), int(2), int(-2)],
            vec![int(3), int(1), int(1), int(1)],
        ];
        for k1 in 0..=2 {
            for k2 in 0..=2 {
                for a in enumerate_partitions(k1, 4) {
                    for b in enumerate_partitions(k2, 4) {
                        let prod = sym_multiply(&m(a.parts()), &m(b.parts()));
                        for x in &points {
                            assert_eq!(prod.eval_exact(x), m(a.parts()).eval_exact(x) * m(b.parts()).eval_exact(x));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn compiled_matches_exact() {
        let q = PowerSumPoly::from_terms([(p(&[1, 1]), ratio(1, 3)), (p(&[2]), ratio(2, 3))]);
        let eigs = [0.3, 1.7, 2.2];
        let t = power_sums(&eigs, 2);
        assert!((q.compile().eval(&t) - q.eval_eigenvalues(&eigs)).abs() < 1e-14);
    }
}
