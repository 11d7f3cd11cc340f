//! Integer partitions, generalized Pochhammer symbols and the multivariate
//! Gamma function.
//!
//! Partitions are enumerated in reverse lexicographic order, e.g. the
//! partitions of 4 come out as `(4), (3,1), (2,2), (2,1,1), (1,1,1,1)`.
//! Basis-change matrices elsewhere in the crate index their rows and columns
//! by this order.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational scalar backing every coefficient table.
pub type Rational = BigRational;

/// Builds the exact rational `num/den`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Builds the exact integer `value` as a rational.
pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Converts an exact rational to the nearest `f64`.
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // numerator or denominator beyond f64 range: go through logs
        let sign = if value.is_negative() { -1.0 } else { 1.0 };
        let num = value.numer().abs();
        let den = value.denom().clone();
        let shift = num.bits().max(den.bits()).saturating_sub(900);
        let n = (&num >> shift).to_f64().unwrap_or(f64::INFINITY);
        let d = (&den >> shift).to_f64().unwrap_or(f64::INFINITY);
        sign * n / d
    })
}

/// An integer partition: non-increasing, strictly positive parts.
///
/// The derived ordering is lexicographic on the parts, so sorting partitions
/// of one weight in descending order yields reverse lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// The empty partition of 0.
    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    /// Validates `parts`. Trailing zeros are dropped; any other zero or an
    /// increase between consecutive parts is rejected.
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        let mut parts = parts;
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.contains(&0) {
            return Err(Error::InvalidPartition(format!(
                "{parts:?}: parts must be strictly positive"
            )));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!(
                "{parts:?}: parts must be non-increasing"
            )));
        }
        if parts.len() > 64 {
            return Err(Error::InvalidPartition(format!(
                "length {} exceeds the supported maximum of 64",
                parts.len()
            )));
        }
        Ok(Self { parts })
    }

    /// Sorts arbitrary non-negative parts into a partition.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self { parts }
    }

    /// The one-row partition `(k)`; `(0)` is the empty partition.
    pub fn row(k: u32) -> Self {
        if k == 0 {
            Self::empty()
        } else {
            Self { parts: vec![k] }
        }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// The integer `k` being partitioned.
    pub fn weight(&self) -> usize {
        self.parts.iter().map(|&p| p as usize).sum()
    }

    /// Number of non-zero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part `i` (0-based), zero past the end.
    pub fn part(&self, i: usize) -> u32 {
        self.parts.get(i).copied().unwrap_or(0)
    }

    /// Multiplicities `nu_1, ..., nu_k` where `nu_j` counts parts equal to `j`.
    pub fn multiplicities(&self) -> Vec<usize> {
        let k = self.parts.first().copied().unwrap_or(0) as usize;
        let mut nu = vec![0; k];
        for &p in &self.parts {
            nu[p as usize - 1] += 1;
        }
        nu
    }

    /// Dominance order: `self >= other` iff every partial sum of `self`
    /// is at least the matching partial sum of `other` (equal weights).
    pub fn dominates(&self, other: &Partition) -> bool {
        if self.weight() != other.weight() {
            return false;
        }
        let mut a = 0u64;
        let mut b = 0u64;
        for i in 0..self.len().max(other.len()) {
            a += self.part(i) as u64;
            b += other.part(i) as u64;
            if a < b {
                return false;
            }
        }
        true
    }

    /// Containment of Young diagrams: `other` fits inside `self`.
    pub fn contains(&self, other: &Partition) -> bool {
        other.len() <= self.len() && (0..other.len()).all(|i| other.part(i) <= self.part(i))
    }
}

impl TryFrom<Vec<u32>> for Partition {
    type Error = Error;

    fn try_from(parts: Vec<u32>) -> Result<Self> {
        Partition::new(parts)
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Self {
        p.parts
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "0");
        }
        let text: Vec<String> = self.parts.iter().map(u32::to_string).collect();
        write!(f, "{}", text.join(","))
    }
}

/// Parses the CLI syntax: comma-separated non-increasing integers, `"0"`
/// being the empty partition.
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        if s.is_empty() {
            return Ok(Partition::empty());
        }
        let parts = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidPartition(format!("{s:?}: {t:?} is not a non-negative integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        if parts == [0] {
            return Ok(Partition::empty());
        }
        if parts.contains(&0) {
            return Err(Error::InvalidPartition(format!(
                "{s:?}: parts must be strictly positive"
            )));
        }
        Partition::new(parts)
    }
}

/// All partitions of `k` with at most `max_length` parts, in reverse
/// lexicographic order. `k = 0` yields the single empty partition.
pub fn enumerate_partitions(k: usize, max_length: usize) -> Vec<Partition> {
    fn rec(rest: u32, max_part: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition { parts: prefix.clone() });
            return;
        }
        if slots == 0 {
            return;
        }
        for p in (1..=max_part.min(rest)).rev() {
            prefix.push(p);
            rec(rest - p, p, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k as u32, k as u32, max_length, &mut Vec::new(), &mut out);
    out
}

/// Classical rising factorial `(a)_n = a (a+1) ... (a+n-1)`, exact.
pub fn rising_factorial(a: &Rational, n: u32) -> Rational {
    let mut acc = Rational::one();
    let mut x = a.clone();
    for _ in 0..n {
        acc *= &x;
        x += Rational::one();
    }
    acc
}

/// Classical rising factorial in floating point.
pub fn rising_factorial_f64(a: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

fn check_length(kappa: &Partition, ell: usize) -> Result<()> {
    if kappa.len() > ell {
        return Err(Error::InvalidPartition(format!(
            "({kappa}) has {} parts, more than ell = {ell}",
            kappa.len()
        )));
    }
    Ok(())
}

/// Generalized Pochhammer symbol `(a)_kappa = prod_j (a - (j-1)/2)_{k_j}`,
/// exact.
pub fn gen_pochhammer(a: &Rational, kappa: &Partition, ell: usize) -> Result<Rational> {
    check_length(kappa, ell)?;
    Ok(gen_pochhammer_unchecked(a, kappa))
}

pub(crate) fn gen_pochhammer_unchecked(a: &Rational, kappa: &Partition) -> Rational {
    let half = ratio(1, 2);
    let mut acc = Rational::one();
    let mut shifted = a.clone();
    for &k in kappa.parts() {
        acc *= rising_factorial(&shifted, k);
        shifted -= &half;
    }
    acc
}

/// Generalized Pochhammer symbol in floating point.
pub fn gen_pochhammer_f64(a: f64, kappa: &Partition, ell: usize) -> Result<f64> {
    check_length(kappa, ell)?;
    Ok(kappa
        .parts()
        .iter()
        .enumerate()
        .map(|(j, &k)| rising_factorial_f64(a - j as f64 / 2.0, k))
        .product())
}

/// `Gamma(x)`. Positive integers and half-integers use the exact closed forms
/// `(m-1)!` and `(2m)! sqrt(pi) / (4^m m!)`; everything else goes through the
/// Lanczos approximation.
pub fn gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    let twice = 2.0 * x;
    if x > 0.0 && twice == twice.floor() && x < 150.0 {
        if x == x.floor() {
            return Ok((1..x as u64).fold(1.0, |acc, i| acc * i as f64));
        }
        // x = m + 1/2
        let m = (x - 0.5) as u64;
        let mut acc = std::f64::consts::PI.sqrt();
        for i in 0..m {
            acc *= i as f64 + 0.5;
        }
        return Ok(acc);
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// `ln |Gamma(x)|` via Lanczos; poles are rejected.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Multivariate Gamma `Gamma_ell(a) = pi^{ell(ell-1)/4} prod_{i=1}^{ell} Gamma(a - (i-1)/2)`.
pub fn multivariate_gamma(a: f64, ell: usize) -> Result<f64> {
    let mut acc = std::f64::consts::PI.powf((ell * ell.saturating_sub(1)) as f64 / 4.0);
    for i in 0..ell {
        acc *= gamma(a - i as f64 / 2.0)?;
    }
    Ok(acc)
}

/// `ln Gamma_ell(a)` for arguments where every shifted Gamma is positive.
pub fn ln_multivariate_gamma(a: f64, ell: usize) -> Result<f64> {
    let mut acc = (ell * ell.saturating_sub(1)) as f64 / 4.0 * std::f64::consts::PI.ln();
    for i in 0..ell {
        let arg = a - i as f64 / 2.0;
        if arg <= 0.0 {
            return Err(Error::Pole(arg));
        }
        acc += ln_gamma(arg)?;
    }
    Ok(acc)
}

/// Exact `n!`.
pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}
