//! Arithmetic random waves on the three-torus and the generalized total
//! variation of `l` independent copies.
//!
//! `T_n(z) = N_n^{-1/2} sum_{lambda in Lambda_n} a_lambda e(lambda . z)` with
//! `a_{-lambda} = conj(a_lambda)`. Coefficients are drawn on a half set of
//! representatives of `Lambda_n / +-`, so `T_n(z) = 2 N_n^{-1/2} Re sum_half a e(lambda . z)`.
//!
//! Grid sums are evaluated by direct summation over the frequencies, but
//! separably: the sum over `lambda_3` is done first for each `(lambda_1,
//! lambda_2)` column, then over `lambda_2`, then over `lambda_1`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::multivariate_gamma;
use crate::sampling::{replicates, RngStream, StreamRng};
use crate::stats::{ks_test_normal, Estimate, KsResult, Welford};

/// `Lambda_n = {lambda in Z^3 : |lambda|^2 = n}` with a half set of
/// representatives modulo `lambda -> -lambda`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub n: u64,
    pub lambdas: Vec<[i64; 3]>,
    /// Sorted lexicographically; the first non-zero coordinate is positive.
    pub half_set: Vec<[i64; 3]>,
}

impl FrequencySet {
    /// `N_n = |Lambda_n|`.
    pub fn count(&self) -> usize {
        self.lambdas.len()
    }

    /// Laplace eigenvalue `E_n = 4 pi^2 n`.
    pub fn energy(&self) -> f64 {
        4.0 * PI * PI * self.n as f64
    }
}

/// Is `n` a sum of three squares (`n != 4^a (8b + 7)`)?
pub fn is_sum_of_three_squares(n: u64) -> bool {
    if n == 0 {
        return true;
    }
    let mut m = n;
    while m % 4 == 0 {
        m /= 4;
    }
    m % 8 != 7
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn in_half_set(l: &[i64; 3]) -> bool {
    l[0] > 0 || (l[0] == 0 && l[1] > 0) || (l[0] == 0 && l[1] == 0 && l[2] > 0)
}

/// Enumerates `Lambda_n` over `|lambda_i| <= floor(sqrt(n))`.
pub fn build_frequency_set(n: u64) -> Result<FrequencySet> {
    if n == 0 {
        return Err(Error::Unsupported("n must be at least 1".into()));
    }
    if !is_sum_of_three_squares(n) {
        return Err(Error::NotRepresentable { n });
    }
    let r = isqrt(n) as i64;
    let mut lambdas = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            let rest = n as i64 - a * a - b * b;
            if rest < 0 {
                continue;
            }
            let c = isqrt(rest as u64) as i64;
            if c * c != rest {
                continue;
            }
            lambdas.push([a, b, -c]);
            if c != 0 {
                lambdas.push([a, b, c]);
            }
        }
    }
    lambdas.sort_unstable();
    let half_set: Vec<[i64; 3]> = lambdas.iter().copied().filter(in_half_set).collect();
    Ok(FrequencySet { n, lambdas, half_set })
}

/// Smallest grid that integrates every trigonometric polynomial of degree
/// two in the field exactly: `4 ceil(sqrt(n)) + 1`.
pub fn min_grid(n: u64) -> usize {
    let r = isqrt(n);
    let ceil = if r * r == n { r } else { r + 1 };
    4 * ceil as usize + 1
}

/// Experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    pub n: u64,
    pub ell: usize,
    pub grid: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl WaveConfig {
    /// Configuration with the minimal alias-free grid.
    pub fn new(n: u64, ell: usize, replicates: usize, seed: u64) -> Self {
        Self { n, ell, grid: min_grid(n), replicates, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.ell) {
            return Err(Error::Config(format!("ell must be 1, 2 or 3, got {}", self.ell)));
        }
        if !is_sum_of_three_squares(self.n) || self.n == 0 {
            return Err(Error::NotRepresentable { n: self.n });
        }
        let min = min_grid(self.n);
        if self.grid < min {
            return Err(Error::Config(format!(
                "grid = {} is below the alias-free minimum 4 ceil(sqrt(n)) + 1 = {min}",
                self.grid
            )));
        }
        Ok(())
    }
}

/// A complex number as `(re, im)`.
type Cx = (f64, f64);

/// `l` independent waves: `coeffs[i][h]` is `a_{i, half_set[h]}`.
#[derive(Clone, Debug)]
pub struct WaveSample {
    pub freq: Arc<FrequencySet>,
    pub ell: usize,
    pub coeffs: Vec<Vec<Cx>>,
}

/// Draws `a = (xi + i eta) / sqrt(2)` on the half set for each copy.
pub fn sample_field<R: Rng + ?Sized>(freq: &Arc<FrequencySet>, ell: usize, rng: &mut R) -> WaveSample {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let coeffs = (0..ell)
        .map(|_| {
            freq.half_set
                .iter()
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    (re * s, im * s)
                })
                .collect()
        })
        .collect();
    WaveSample { freq: freq.clone(), ell, coeffs }
}

fn phase(l: &[i64; 3], z: &[f64; 3]) -> Cx {
    let arg = 2.0 * PI * (l[0] as f64 * z[0] + l[1] as f64 * z[1] + l[2] as f64 * z[2]);
    (arg.cos(), arg.sin())
}

impl WaveSample {
    fn norm(&self) -> f64 {
        2.0 / (self.freq.count() as f64).sqrt()
    }

    /// Scale of the normalized Jacobian entries `2 sqrt(3 / (n N_n))`.
    fn jacobian_scale(&self) -> f64 {
        2.0 * (3.0 / (self.freq.n as f64 * self.freq.count() as f64)).sqrt()
    }

    /// `T^(i)(z)` by direct summation.
    pub fn eval_field(&self, copy: usize, z: [f64; 3]) -> f64 {
        let s: f64 = self
            .freq
            .half_set
            .iter()
            .zip(&self.coeffs[copy])
            .map(|(l, a)| {
                let (c, si) = phase(l, &z);
                a.0 * c - a.1 * si
            })
            .sum();
        self.norm() * s
    }

    /// Gradient `d/dz_j T^(i)(z)`.
    pub fn eval_gradient(&self, copy: usize, z: [f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (l, a) in self.freq.half_set.iter().zip(&self.coeffs[copy]) {
            let (c, s) = phase(l, &z);
            // Re(2 pi i lambda_j a e) = -2 pi lambda_j Im(a e)
            let im = a.0 * s + a.1 * c;
            for j in 0..3 {
                g[j] -= 2.0 * PI * l[j] as f64 * im;
            }
        }
        g.map(|x| x * self.norm())
    }

    /// Normalized Jacobian `(E_n / 3)^{-1/2} D T(z)`, row `i` for copy `i`.
    pub fn normalized_jacobian(&self, z: [f64; 3]) -> Vec<[f64; 3]> {
        let scale = (self.freq.energy() / 3.0).sqrt();
        (0..self.ell).map(|i| self.eval_gradient(i, z).map(|x| x / scale)).collect()
    }

    /// `(1/sqrt(l)) sum_i (N_n/2)^{-1/2} sum_half (|a_{i,lambda}|^2 - 1)`.
    pub fn second_chaos_stat(&self) -> f64 {
        let half = self.freq.half_set.len() as f64;
        let total: f64 = self
            .coeffs
            .iter()
            .map(|row| row.iter().map(|a| a.0 * a.0 + a.1 * a.1 - 1.0).sum::<f64>() / half.sqrt())
            .sum();
        total / (self.ell as f64).sqrt()
    }

    fn jacobian_channels(&self) -> Vec<Vec<Cx>> {
        let scale = self.jacobian_scale();
        let mut out = Vec::with_capacity(3 * self.ell);
        for row in &self.coeffs {
            for j in 0..3 {
                out.push(
                    self.freq
                        .half_set
                        .iter()
                        .zip(row)
                        .map(|(l, a)| {
                            let f = scale * l[j] as f64;
                            // i * lambda_j * a
                            (-f * a.1, f * a.0)
                        })
                        .collect(),
                );
            }
        }
        out
    }
}

/// `Phi(M) = det(M M^T)^{1/2}` for `l x 3` matrices given by rows.
pub fn phi(rows: &[[f64; 3]]) -> f64 {
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    match rows {
        [a] => dot(a, a).sqrt(),
        [a, b] => {
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            dot(&c, &c).sqrt()
        }
        [a, b, c] => {
            let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]);
            det.abs()
        }
        _ => panic!("Phi is defined here for 1 <= l <= 3"),
    }
}

/// `H_(1)` on `l x 3` matrices: `(1/6) sum_{ij} (M_ij^2 - 1)`.
fn hermite_one(rows: &[[f64; 3]]) -> f64 {
    rows.iter().flat_map(|r| r.iter()).map(|x| x * x - 1.0).sum::<f64>() / 6.0
}

/// Separable evaluator of `Re sum_half b_lambda e(lambda . k / G)` on the
/// grid `k in {0..G-1}^3`.
struct GridPlan {
    g: usize,
    half: Vec<[i64; 3]>,
    /// distinct `lambda_1` values (all `>= 0` on the half set)
    lambda1: Vec<i64>,
    /// `(index into lambda1, lambda_2, start, end)` ranges of `half`
    columns: Vec<(usize, i64, usize, usize)>,
    twiddle: Vec<Cx>,
}

impl GridPlan {
    fn new(freq: &FrequencySet, g: usize) -> Self {
        let half = freq.half_set.clone();
        let mut lambda1: Vec<i64> = Vec::new();
        let mut columns = Vec::new();
        let mut start = 0;
        while start < half.len() {
            let (a, b) = (half[start][0], half[start][1]);
            let mut end = start;
            while end < half.len() && half[end][0] == a && half[end][1] == b {
                end += 1;
            }
            if lambda1.last() != Some(&a) {
                lambda1.push(a);
            }
            columns.push((lambda1.len() - 1, b, start, end));
            start = end;
        }
        let twiddle = (0..g)
            .map(|r| {
                let arg = 2.0 * PI * r as f64 / g as f64;
                (arg.cos(), arg.sin())
            })
            .collect();
        Self { g, half, lambda1, columns, twiddle }
    }

    fn e(&self, k: i64, z: usize) -> Cx {
        self.twiddle[(k * z as i64).rem_euclid(self.g as i64) as usize]
    }

    /// Calls `sink(values)` once per `(z2, z3)` line, where `values[c][z1]`
    /// is channel `c` at grid point `(z1, z2, z3)`.
    fn evaluate(&self, channels: &[Vec<Cx>], mut sink: impl FnMut(&[Vec<f64>])) {
        let g = self.g;
        let nl1 = self.lambda1.len();
        // q[c][l1][z2 * g + z3]
        let mut q = vec![vec![vec![(0.0, 0.0); g * g]; nl1]; channels.len()];
        let mut column = vec![(0.0, 0.0); g];
        for (c, coef) in channels.iter().enumerate() {
            for &(l1, l2, start, end) in &self.columns {
                for (z3, slot) in column.iter_mut().enumerate() {
                    let mut acc = (0.0, 0.0);
                    for h in start..end {
                        let (er, ei) = self.e(self.half[h][2], z3);
                        let (br, bi) = coef[h];
                        acc.0 += br * er - bi * ei;
                        acc.1 += br * ei + bi * er;
                    }
                    *slot = acc;
                }
                let plane = &mut q[c][l1];
                for z2 in 0..g {
                    let (er, ei) = self.e(l2, z2);
                    let row = &mut plane[z2 * g..(z2 + 1) * g];
                    for (dst, p) in row.iter_mut().zip(&column) {
                        dst.0 += p.0 * er - p.1 * ei;
                        dst.1 += p.0 * ei + p.1 * er;
                    }
                }
            }
        }
        let cos: Vec<Vec<f64>> =
            self.lambda1.iter().map(|&k| (0..g).map(|z| self.e(k, z).0).collect()).collect();
        let sin: Vec<Vec<f64>> =
            self.lambda1.iter().map(|&k| (0..g).map(|z| self.e(k, z).1).collect()).collect();
        let mut values = vec![vec![0.0; g]; channels.len()];
        for idx in 0..g * g {
            for (c, out) in values.iter_mut().enumerate() {
                out.iter_mut().for_each(|v| *v = 0.0);
                for l1 in 0..nl1 {
                    let (qr, qi) = q[c][l1][idx];
                    for ((v, &cs), &sn) in out.iter_mut().zip(&cos[l1]).zip(&sin[l1]) {
                        *v += qr * cs - qi * sn;
                    }
                }
            }
            sink(&values);
        }
    }
}

/// Grid quadratures of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridIntegrals {
    /// `(E_n/3)^{l/2} G^{-3} sum_z Phi(J(z))`.
    pub total_variation: f64,
    /// `G^{-3} sum_z H_(1)(J(z))`.
    pub hermite_one_mean: f64,
}

/// Total variation by the Riemann sum on the `G^3` periodic grid.
pub fn total_variation(sample: &WaveSample, grid: usize) -> GridIntegrals {
    let plan = GridPlan::new(&sample.freq, grid);
    let channels = sample.jacobian_channels();
    let ell = sample.ell;
    let mut phi_sum = 0.0;
    let mut h_sum = 0.0;
    let mut rows = vec![[0.0; 3]; ell];
    plan.evaluate(&channels, |values| {
        let mut line_phi = 0.0;
        let mut line_h = 0.0;
        for z1 in 0..grid {
            for (i, row) in rows.iter_mut().enumerate() {
                *row = [values[3 * i][z1], values[3 * i + 1][z1], values[3 * i + 2][z1]];
            }
            line_phi += phi(&rows);
            line_h += hermite_one(&rows);
        }
        phi_sum += line_phi;
        h_sum += line_h;
    });
    let points = (grid * grid * grid) as f64;
    GridIntegrals {
        total_variation: (sample.freq.energy() / 3.0).powf(ell as f64 / 2.0) * phi_sum / points,
        hermite_one_mean: h_sum / points,
    }
}

/// The same Riemann sum with the Jacobian summed directly at every grid
/// point; only for small frequency sets and grids.
pub fn total_variation_direct(sample: &WaveSample, grid: usize) -> GridIntegrals {
    let mut phi_sum = 0.0;
    let mut h_sum = 0.0;
    let g = grid as f64;
    for a in 0..grid {
        for b in 0..grid {
            for c in 0..grid {
                let rows = sample.normalized_jacobian([a as f64 / g, b as f64 / g, c as f64 / g]);
                phi_sum += phi(&rows);
                h_sum += hermite_one(&rows);
            }
        }
    }
    let points = g * g * g;
    GridIntegrals {
        total_variation: (sample.freq.energy() / 3.0).powf(sample.ell as f64 / 2.0) * phi_sum / points,
        hermite_one_mean: h_sum / points,
    }
}

/// `r_n(z) = N_n^{-1} sum_Lambda cos(2 pi lambda . z)`.
pub fn covariance(freq: &FrequencySet, z: [f64; 3]) -> f64 {
    freq.lambdas.iter().map(|l| phase(l, &z).0).sum::<f64>() / freq.count() as f64
}

/// `R_n(z)_{jj'} = E[J_j(0) J_j'(z)] = 3/(n N_n) sum_Lambda lambda_j lambda_j' cos(2 pi lambda . z)`
/// for the normalized gradient of one wave.
pub fn normalized_gradient_covariance(freq: &FrequencySet, z: [f64; 3]) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    let scale = 3.0 / (freq.n as f64 * freq.count() as f64);
    for l in &freq.lambdas {
        let c = phase(l, &z).0;
        for j in 0..3 {
            for k in 0..3 {
                r[j][k] += scale * (l[j] * l[k]) as f64 * c;
            }
        }
    }
    r
}

/// Exact lattice diagnostics of the gradient covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDiagnostics {
    pub n: u64,
    pub count: usize,
    pub grid: usize,
    /// Grid integral of `Tr(R_n(z)^2)`.
    pub integral_tr_r2: f64,
    /// `9 / N_n`.
    pub expected: f64,
    /// `max |R_n(0) - Id_3|`.
    pub r0_deviation: f64,
}

pub fn covariance_diagnostics(freq: &FrequencySet, grid: usize) -> Result<CovarianceDiagnostics> {
    let min = min_grid(freq.n);
    if grid < min {
        return Err(Error::Config(format!("grid {grid} is below the alias-free minimum {min}")));
    }
    let plan = GridPlan::new(freq, grid);
    let scale = 3.0 / (freq.n as f64 * freq.count() as f64);
    let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    // sum over Lambda of a cosine = 2 Re sum over the half set
    let channels: Vec<Vec<Cx>> = pairs
        .iter()
        .map(|&(j, k)| freq.half_set.iter().map(|l| (2.0 * scale * (l[j] * l[k]) as f64, 0.0)).collect())
        .collect();
    let mut total = 0.0;
    plan.evaluate(&channels, |v| {
        for z1 in 0..grid {
            let diag: f64 = (0..3).map(|c| v[c][z1] * v[c][z1]).sum();
            let off: f64 = (3..6).map(|c| v[c][z1] * v[c][z1]).sum();
            total += diag + 2.0 * off;
        }
    });
    let r0 = normalized_gradient_covariance(freq, [0.0; 3]);
    let mut dev: f64 = 0.0;
    for (j, row) in r0.iter().enumerate() {
        for (k, x) in row.iter().enumerate() {
            dev = dev.max((x - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(CovarianceDiagnostics {
        n: freq.n,
        count: freq.count(),
        grid,
        integral_tr_r2: total / (grid * grid * grid) as f64,
        expected: 9.0 / freq.count() as f64,
        r0_deviation: dev,
    })
}

/// `2^{l/2} Gamma_l(2) / Gamma_l(3/2)`, the first two chaos coefficients of
/// `Phi` on `l x 3` matrices.
pub fn phi_coefficient(ell: usize) -> f64 {
    2f64.powf(ell as f64 / 2.0)
        * multivariate_gamma(2.0, ell).expect("no pole")
        / multivariate_gamma(1.5, ell).expect("no pole")
}

/// Exact mean `(E_n/3)^{l/2} 2^{l/2} Gamma_l(2) / Gamma_l(3/2)`.
pub fn mean_theory(n: u64, ell: usize) -> f64 {
    (4.0 * PI * PI * n as f64 / 3.0).powf(ell as f64 / 2.0) * phi_coefficient(ell)
}

/// Leading variance `(E_n/3)^l 2^l Gamma_l(2)^2 / Gamma_l(3/2)^2 l / (2 N_n)`,
/// which is also the exact variance of the second-chaos projection.
pub fn variance_leading(n: u64, ell: usize, count: usize) -> f64 {
    let m = mean_theory(n, ell);
    m * m * ell as f64 / (2.0 * count as f64)
}

/// Per-replicate output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub total_variation: f64,
    pub second_chaos_stat: f64,
    /// `(E_n/3)^{l/2} Phi^((1)) G^{-3} sum_z H_(1)(J(z))`, equal to
    /// `sqrt(Var_2) * second_chaos_stat` up to rounding.
    pub second_chaos_quadrature: f64,
}

fn replicate_row(freq: &Arc<FrequencySet>, cfg: &WaveConfig, i: usize, rng: &mut StreamRng) -> ReplicateRow {
    let sample = sample_field(freq, cfg.ell, rng);
    let grid = total_variation(&sample, cfg.grid);
    let scale = (freq.energy() / 3.0).powf(cfg.ell as f64 / 2.0) * phi_coefficient(cfg.ell);
    ReplicateRow {
        replicate: i,
        total_variation: grid.total_variation,
        second_chaos_stat: sample.second_chaos_stat(),
        second_chaos_quadrature: scale * grid.hermite_one_mean,
    }
}

/// Runs every replicate; replicate `i` uses substream `i` of `(seed, 0)`.
pub fn run_replicates(cfg: &WaveConfig) -> Result<Vec<ReplicateRow>> {
    cfg.validate()?;
    let freq = Arc::new(build_frequency_set(cfg.n)?);
    let stream = RngStream::new(cfg.seed, 0);
    Ok(replicates(stream, cfg.replicates, |i, rng| replicate_row(&freq, cfg, i, rng)))
}

/// Total variation of replicate `i` at two grid sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDoubling {
    pub replicate: usize,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

/// Recomputes the first `count` replicates of `cfg` on the grid `2G`.
pub fn grid_doubling(cfg: &WaveConfig, count: usize) -> Result<Vec<GridDoubling>> {
    cfg.validate()?;
    let freq = Arc::new(build_frequency_set(cfg.n)?);
    let stream = RngStream::new(cfg.seed, 0);
    let count = count.min(cfg.replicates);
    Ok(replicates(stream, count, |i, rng| {
        let sample = sample_field(&freq, cfg.ell, rng);
        let coarse = total_variation(&sample, cfg.grid).total_variation;
        let fine = total_variation(&sample, 2 * cfg.grid).total_variation;
        GridDoubling { replicate: i, coarse, fine, relative_change: (fine - coarse).abs() / coarse }
    }))
}

/// Mean experiment summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRecord {
    pub config: WaveConfig,
    pub count: usize,
    pub mean: Estimate,
    pub theory: f64,
    pub z_score: f64,
}

pub fn mean_summary(cfg: &WaveConfig, rows: &[ReplicateRow]) -> Result<MeanRecord> {
    let freq = build_frequency_set(cfg.n)?;
    let w: Welford = rows.iter().map(|r| r.total_variation).collect();
    let theory = mean_theory(cfg.n, cfg.ell);
    let mean = w.estimate();
    Ok(MeanRecord { config: cfg.clone(), count: freq.count(), mean, theory, z_score: mean.z_score(theory) })
}

/// Variance and normality summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRecord {
    pub config: WaveConfig,
    pub count: usize,
    pub mean_theory: f64,
    pub variance_empirical: f64,
    pub variance_leading: f64,
    /// empirical / leading
    pub variance_ratio: f64,
    /// `Var_2 / (Var_2 + Var(V - E V - V[2]))` with `V[2] = sqrt(Var_2) * stat`.
    pub second_chaos_share: f64,
    /// `Var_2 / empirical variance`.
    pub second_chaos_fraction_of_empirical: f64,
    /// KS test of `(V - E V) / sd_empirical` against `N(0, 1)`.
    pub ks_total_variation: KsResult,
    /// KS test of `(V - E V) / sqrt(Var_leading)`.
    pub ks_total_variation_theory_scale: KsResult,
    /// KS test of the second-chaos statistic.
    pub ks_second_chaos: KsResult,
    /// Largest per-replicate gap between the quadrature and closed second-chaos projections.
    pub max_quadrature_gap: f64,
}

/// Summaries for the variance and CLT experiments.
pub fn variance_summary(cfg: &WaveConfig, rows: &[ReplicateRow]) -> Result<VarianceRecord> {
    let freq = build_frequency_set(cfg.n)?;
    if freq.count() < 24 {
        return Err(Error::InsufficientReplicates(format!(
            "N_n = {} is below 24; asymptotic variance comparisons need more frequencies",
            freq.count()
        )));
    }
    if rows.len() < 500 {
        return Err(Error::InsufficientReplicates(format!("{} replicates, need at least 500", rows.len())));
    }
    let mean = mean_theory(cfg.n, cfg.ell);
    let var2 = variance_leading(cfg.n, cfg.ell, freq.count());
    let tv: Welford = rows.iter().map(|r| r.total_variation).collect();
    let residual: Welford =
        rows.iter().map(|r| r.total_variation - mean - var2.sqrt() * r.second_chaos_stat).collect();
    let sd = tv.variance().sqrt();
    let centred: Vec<f64> = rows.iter().map(|r| r.total_variation - mean).collect();
    let stats: Vec<f64> = rows.iter().map(|r| r.second_chaos_stat).collect();
    let gap = rows
        .iter()
        .map(|r| (r.second_chaos_quadrature - var2.sqrt() * r.second_chaos_stat).abs())
        .fold(0.0, f64::max);
    Ok(VarianceRecord {
        config: cfg.clone(),
        count: freq.count(),
        mean_theory: mean,
        variance_empirical: tv.variance(),
        variance_leading: var2,
        variance_ratio: tv.variance() / var2,
        second_chaos_share: var2 / (var2 + residual.variance()),
        second_chaos_fraction_of_empirical: var2 / tv.variance(),
        ks_total_variation: ks_test_normal(&centred, 0.0, sd),
        ks_total_variation_theory_scale: ks_test_normal(&centred, 0.0, var2.sqrt()),
        ks_second_chaos: ks_test_normal(&stats, 0.0, 1.0),
        max_quadrature_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_counts() {
        assert_eq!(build_frequency_set(1).unwrap().count(), 6);
        assert_eq!(build_frequency_set(2).unwrap().count(), 12);
        assert_eq!(build_frequency_set(3).unwrap().count(), 8);
        assert_eq!(build_frequency_set(5).unwrap().count(), 24);
        assert!(matches!(build_frequency_set(7), Err(Error::NotRepresentable { n: 7 })));
        assert!(matches!(build_frequency_set(28), Err(Error::NotRepresentable { n: 28 })));
        let f = build_frequency_set(9).unwrap();
        assert_eq!(f.half_set.len() * 2, f.count());
        for l in &f.lambdas {
            assert_eq!(l[0] * l[0] + l[1] * l[1] + l[2] * l[2], 9);
            assert!(f.lambdas.contains(&[-l[0], -l[1], -l[2]]));
        }
    }

    #[test]
    fn grid_minimum() {
        assert_eq!(min_grid(1), 5);
        assert_eq!(min_grid(2), 9);
        assert_eq!(min_grid(614), 101);
        let mut cfg = WaveConfig::new(5, 1, 10, 0);
        assert!(cfg.validate().is_ok());
        cfg.grid -= 1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg = WaveConfig::new(5, 4, 10, 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn phi_cases() {
        assert!((phi(&[[3.0, 4.0, 0.0]]) - 5.0).abs() < 1e-15);
        assert!((phi(&[[1.0, 0.0, 0.0], [1.0, 2.0, 0.0]]) - 2.0).abs() < 1e-15);
        assert!((phi(&[[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [1.0, 1.0, -1.0]]) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn factored_grid_matches_direct() {
        let freq = Arc::new(build_frequency_set(1).unwrap());
        let mut rng = RngStream::new(3, 0).rng();
        let sample = sample_field(&freq, 3, &mut rng);
        let a = total_variation(&sample, 5);
        let b = total_variation_direct(&sample, 5);
        assert!((a.total_variation - b.total_variation).abs() < 1e-8 * b.total_variation);
        assert!((a.hermite_one_mean - b.hermite_one_mean).abs() < 1e-10);
        let freq = Arc::new(build_frequency_set(6).unwrap());
        let sample = sample_field(&freq, 2, &mut rng);
        let a = total_variation(&sample, 13);
        let b = total_variation_direct(&sample, 13);
        assert!((a.total_variation - b.total_variation).abs() < 1e-8 * b.total_variation);
    }

    #[test]
    fn diagnostics_small() {
        for n in [1u64, 2, 5] {
            let f = build_frequency_set(n).unwrap();
            let d = covariance_diagnostics(&f, min_grid(n)).unwrap();
            assert!((d.integral_tr_r2 - d.expected).abs() < 1e-10, "{d:?}");
            assert!(d.r0_deviation < 1e-12);
        }
        assert!((covariance(&build_frequency_set(2).unwrap(), [0.0; 3]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn second_chaos_chain() {
        let freq = Arc::new(build_frequency_set(6).unwrap());
        let cfg = WaveConfig::new(6, 2, 4, 17);
        let mut rng = RngStream::new(17, 0).rng();
        let row = replicate_row(&freq, &cfg, 0, &mut rng);
        let var2 = variance_leading(6, 2, freq.count());
        assert!((row.second_chaos_quadrature - var2.sqrt() * row.second_chaos_stat).abs() < 1e-8);
    }

    #[test]
    fn theory_constants() {
        // l = 1: (E/3)^{1/2} 2 sqrt(2) / sqrt(pi)
        let n = 614;
        let expected = (4.0 * PI * PI * n as f64 / 3.0).sqrt() * 2.0 * 2f64.sqrt() / PI.sqrt();
        assert!((mean_theory(n, 1) - expected).abs() < 1e-10 * expected);
    }
}
