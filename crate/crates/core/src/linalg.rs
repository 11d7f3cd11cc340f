//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a symmetric matrix is treated as
/// singular.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Eigenvalues and eigenvectors (columns) of a symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    m.symmetric_eigenvalues().iter().copied().collect()
}

/// `V f(D) V^T` for a symmetric `m = V D V^T`.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        scaled.column_mut(j).scale_mut(fv);
    }
    scaled * vecs.transpose()
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
}

/// Checks symmetry and positive definiteness with the relative floor
/// `EIGEN_FLOOR * trace`.
pub fn check_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotPositiveDefinite("matrix is not symmetric".into()));
    }
    let vals = sym_eigenvalues(m);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = EIGEN_FLOOR * m.trace().abs();
    if !(min > floor) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {min:e} is not above {floor:e}"
        )));
    }
    Ok(())
}

/// `m^{1/2}` of a positive-definite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::sqrt)
}

/// `m^{-1/2}` of a positive-definite matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |v| 1.0 / v.sqrt())
}

/// Eigenvalues of the `l x l` Gram matrix `X X^T`.
pub fn gram_eigenvalues(x: &DMatrix<f64>) -> Vec<f64> {
    sym_eigenvalues(&(x * x.transpose()))
}

/// Determinant of a small symmetric positive-semidefinite matrix via Cholesky,
/// falling back to LU.
pub fn det_psd(m: &DMatrix<f64>) -> f64 {
    match m.clone().cholesky() {
        Some(c) => c.l_dirty().diagonal().iter().map(|d| d * d).product(),
        None => m.determinant(),
    }
}

/// Parses a matrix given as rows separated by `;` and entries by `,`.
pub fn parse_matrix(s: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Dimension(format!("matrix entry {x:?} is not a number")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension(format!("ragged matrix {s:?}")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
