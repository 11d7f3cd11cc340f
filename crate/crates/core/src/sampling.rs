//! Seeded Gaussian matrices, Haar frames, Wishart matrices, the polar
//! factorization, and the batched Monte Carlo driver.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{check_positive_definite, sym_eigen, sym_sqrt, EIGEN_FLOOR};
use crate::stats::Welford;

/// The generator used everywhere.
pub type StreamRng = ChaCha8Rng;

/// A reproducible random stream. Distinct `stream_id`s under one seed are
/// independent ChaCha streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// An independent child stream, e.g. one per Monte Carlo batch.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream { seed: splitmix(self.seed ^ splitmix(self.stream_id.wrapping_add(1))), stream_id: index }
    }
}

/// `(l, n, Sigma)` Gaussian matrix ensemble: rows i.i.d. `N(0, Sigma)`.
#[derive(Clone, Debug)]
pub struct MatrixEnsemble {
    ell: usize,
    n: usize,
    sigma: Option<DMatrix<f64>>,
    sigma_sqrt: Option<DMatrix<f64>>,
}

impl MatrixEnsemble {
    pub fn standard(ell: usize, n: usize) -> Result<Self> {
        if ell == 0 || ell > n {
            return Err(Error::Dimension(format!("need 1 <= l <= n, got l = {ell}, n = {n}")));
        }
        Ok(Self { ell, n, sigma: None, sigma_sqrt: None })
    }

    pub fn with_sigma(ell: usize, n: usize, sigma: DMatrix<f64>) -> Result<Self> {
        let mut ens = Self::standard(ell, n)?;
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::Dimension(format!("Sigma must be {n}x{n}")));
        }
        check_positive_definite(&sigma)?;
        ens.sigma_sqrt = Some(sym_sqrt(&sigma));
        ens.sigma = Some(sigma);
        Ok(ens)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> Option<&DMatrix<f64>> {
        self.sigma.as_ref()
    }
}

/// `l x n` matrix of i.i.d. standard normals.
pub fn standard_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// A draw from the ensemble: standard entries right-multiplied by `Sigma^{1/2}`.
pub fn sample_gaussian_matrix<R: Rng + ?Sized>(ens: &MatrixEnsemble, rng: &mut R) -> DMatrix<f64> {
    let z = standard_gaussian(ens.ell, ens.n, rng);
    match &ens.sigma_sqrt {
        Some(root) => z * root,
        None => z,
    }
}

/// Haar-distributed `l x n` matrix with orthonormal rows, from the QR
/// factorization of a Gaussian `n x l` matrix with the signs fixed so that
/// the triangular factor has a positive diagonal.
pub fn sample_stiefel_haar<R: Rng + ?Sized>(n: usize, ell: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(ell <= n && ell > 0, "need 1 <= l <= n");
    let g = standard_gaussian(n, ell, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..ell {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.transpose()
}

/// Haar-distributed orthogonal `n x n` matrix.
pub fn sample_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    sample_stiefel_haar(n, n, rng)
}

/// Wishart `W_l(n, Id)` draw `R = A A^T` by the Bartlett decomposition:
/// `A` lower triangular with `A_ii^2 ~ chi^2_{n-i+1}` and standard normal
/// entries below the diagonal.
pub fn sample_wishart<R: Rng + ?Sized>(ell: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(ell, ell);
    for i in 0..ell {
        let chi = ChiSquared::new((n - i) as f64).expect("positive degrees of freedom");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    &a * a.transpose()
}

/// Polar factorization `X = R^{1/2} U` with `R = X X^T` and `U` on the
/// Stiefel manifold.
pub fn polar_decompose(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = x * x.transpose();
    let (vals, vecs) = sym_eigen(&r);
    let threshold = EIGEN_FLOOR * r.trace();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > threshold) {
        return Err(Error::RankDeficient { min_eigenvalue: min, threshold });
    }
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / v.sqrt());
    }
    let inv_sqrt = scaled * vecs.transpose();
    let u = inv_sqrt * x;
    Ok((r, u))
}

/// Draws per Monte Carlo batch; fixes the batch-to-stream mapping.
pub const BATCH_SIZE: usize = 4096;

/// Runs `samples` draws of a vector-valued integrand and returns one
/// [`Welford`] accumulator per output coordinate.
///
/// Batch `b` always uses `stream.substream(b)` and batches are merged in
/// index order, so the result does not depend on the number of worker
/// threads.
pub fn monte_carlo<F>(stream: RngStream, samples: usize, dims: usize, f: F) -> Vec<Welford>
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    let batches = samples.div_ceil(BATCH_SIZE);
    let partial: Vec<Vec<Welford>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let count = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            let mut acc = vec![Welford::new(); dims];
            let mut out = vec![0.0; dims];
            for _ in 0..count {
                f(&mut rng, &mut out);
                for (w, &x) in acc.iter_mut().zip(&out) {
                    w.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Welford::new(); dims];
    for batch in &partial {
        for (t, w) in total.iter_mut().zip(batch) {
            t.merge(w);
        }
    }
    total
}

/// Like [`monte_carlo`] but returns every draw, in replicate order; replicate
/// `i` uses `stream.substream(i)`.
pub fn replicates<T, F>(stream: RngStream, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i as u64).rng();
            f(i, &mut rng)
        })
        .collect()
}
