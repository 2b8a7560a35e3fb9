//! Dense real vectors and matrices.
//!
//! Only the handful of operations the metrics need live here: column means,
//! sample covariance, traces, cosine similarity and the square root of a
//! symmetric positive-semidefinite matrix. All arithmetic is `f64`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for slightly negative eigenvalues in [`sqrtm_psd`].
pub const DEFAULT_NEG_TOL: f64 = 1e-10;

/// Relative asymmetry accepted by [`sqrtm_psd`].
const SYMMETRY_TOL: f64 = 1e-8;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!(
            "{what} entry {i} is not finite ({})",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// A dense vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector must have at least one entry"));
        }
        check_finite(&data, "vector")?;
        Ok(Vector(data))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Squared Euclidean distance to `other`.
    pub fn squared_distance(&self, other: &Vector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Vector::new(data)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

/// A dense row-major matrix with finite entries and at least one row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        check_finite(&data, "matrix")?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Matrix::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        check_finite(diag, "diagonal")?;
        let mut m = Matrix::zeros(n, n)?;
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut data = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out = &mut data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
        })
    }

    /// Element-wise `self + scale * other`.
    pub fn add_scaled(&self, other: &Matrix, scale: f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Adds `value` to every diagonal entry in place.
    pub fn add_to_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += value;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Column means of an `N x D` matrix.
pub fn mean_vector(rows: &Matrix) -> Result<Vector> {
    let n = rows.rows();
    let mut sums = vec![0.0; rows.cols()];
    for row in rows.row_iter() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let inv = n as f64;
    Vector::new(sums.into_iter().map(|s| s / inv).collect())
}

/// Sample covariance (divisor `N - 1`) of the rows of an `N x D` matrix.
///
/// The result is symmetric by construction: only the upper triangle is
/// accumulated and then mirrored.
pub fn covariance(rows: &Matrix) -> Result<Matrix> {
    let n = rows.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let d = rows.cols();
    let mean = mean_vector(rows)?;
    let mu = mean.as_slice();
    let mut acc = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for row in rows.row_iter() {
        for ((c, x), m) in centered.iter_mut().zip(row).zip(mu) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let out = &mut acc[i * d + i..(i + 1) * d];
            for (o, cj) in out.iter_mut().zip(&centered[i..]) {
                *o += ci * cj;
            }
        }
    }
    let divisor = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = acc[i * d + j] / divisor;
            acc[i * d + j] = v;
            acc[j * d + i] = v;
        }
    }
    Matrix::new(d, d, acc)
}

/// Sum of the diagonal of a square matrix.
pub fn trace(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "trace needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok((0..a.rows()).map(|i| a.get(i, i)).sum())
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &Vector, v: &Vector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cosine similarity of vectors with dims {} and {}",
            u.dim(),
            v.dim()
        )));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Symmetric eigendecomposition `A = V diag(w) V^T`, eigenvalues unordered.
pub(crate) fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(a.to_nalgebra());
    let n = a.rows();
    let mut vecs = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vecs[i * n + j] = eig.eigenvectors[(i, j)];
        }
    }
    (
        eig.eigenvalues.iter().copied().collect(),
        Matrix {
            rows: n,
            cols: n,
            data: vecs,
        },
    )
}

/// Eigenvalues of a symmetric matrix after the same validation and clamping
/// [`sqrtm_psd`] applies.
pub(crate) fn psd_eigen(a: &Matrix, neg_tol: f64) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !(neg_tol >= 0.0 && neg_tol.is_finite()) {
        return Err(Error::invalid(format!(
            "negative-eigenvalue tolerance must be finite and >= 0, got {neg_tol}"
        )));
    }
    let scale = a.frobenius_norm();
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let mut sym = a.clone();
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            sym.data[i * n + j] = v;
            sym.data[j * n + i] = v;
        }
    }
    let (mut values, vectors) = symmetric_eigen(&sym);
    let spectral = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = -neg_tol * spectral;
    for v in values.iter_mut() {
        if *v < floor {
            return Err(Error::NotPsd {
                eigenvalue: *v,
                tolerance: floor,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok((values, vectors))
}

/// Principal square root of a symmetric positive-semidefinite matrix.
///
/// Eigenvalues in `[-neg_tol * ||A||_2, 0)` are treated as zero; anything more
/// negative is rejected with [`Error::NotPsd`].
pub fn sqrtm_psd(a: &Matrix, neg_tol: f64) -> Result<Matrix> {
    let (values, vectors) = psd_eigen(a, neg_tol)?;
    let n = a.rows();
    let roots: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
    // S = V diag(sqrt(w)) V^T, upper triangle mirrored
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for (k, r) in roots.iter().enumerate() {
                s += vectors.get(i, k) * r * vectors.get(j, k);
            }
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    Matrix::new(n, n, data)
}

/// `Tr(A^{1/2})` for symmetric PSD `A`, without forming the root.
pub(crate) fn trace_sqrt_psd(a: &Matrix, neg_tol: f64) -> Result<f64> {
    let (values, _) = psd_eigen(a, neg_tol)?;
    Ok(values.iter().map(|v| v.sqrt()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mean_of_symmetric_pair() {
        let mu = mean_vector(&m(&[&[0.0, 0.0], &[2.0, 2.0]])).unwrap();
        assert_eq!(mu.as_slice(), &[1.0, 1.0]);
        assert_eq!(mean_vector(&m(&[&[5.0]])).unwrap().as_slice(), &[5.0]);
    }

    #[test]
    fn empty_matrix_rejected() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            Matrix::from_rows(&empty),
            Err(Error::InvalidInput(_))
        ));
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn covariance_small_cases() {
        let c = covariance(&m(&[&[0.0], &[2.0]])).unwrap();
        assert_eq!(c.as_slice(), &[2.0]);
        let c = covariance(&m(&[&[3.0, -1.0], &[3.0, -1.0], &[3.0, -1.0]])).unwrap();
        assert!(c.as_slice().iter().all(|v| *v == 0.0));
        assert!(matches!(
            covariance(&m(&[&[1.0, 2.0]])),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn sqrtm_trivial_cases() {
        let i3 = Matrix::identity(3).unwrap();
        let s = sqrtm_psd(&i3, DEFAULT_NEG_TOL).unwrap();
        for (a, b) in s.as_slice().iter().zip(i3.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        let s = sqrtm_psd(&Matrix::from_diagonal(&[4.0, 9.0]).unwrap(), DEFAULT_NEG_TOL).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((s.get(1, 1) - 3.0).abs() < 1e-14);
        assert!(s.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn sqrtm_rejects_asymmetric_and_negative() {
        let a = m(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(sqrtm_psd(&a, DEFAULT_NEG_TOL), Err(Error::InvalidInput(_))));
        let neg = Matrix::from_diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(sqrtm_psd(&neg, DEFAULT_NEG_TOL), Err(Error::NotPsd { .. })));
        let rect = Matrix::zeros(2, 3).unwrap();
        assert!(sqrtm_psd(&rect, DEFAULT_NEG_TOL).is_err());
    }

    #[test]
    fn sqrtm_clamps_tiny_negative_eigenvalues() {
        let a = Matrix::from_diagonal(&[1.0, -1e-12]).unwrap();
        let s = sqrtm_psd(&a, DEFAULT_NEG_TOL).unwrap();
        assert_eq!(s.get(1, 1), 0.0);
        assert!((s.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_cases() {
        assert_eq!(trace(&Matrix::identity(5).unwrap()).unwrap(), 5.0);
        assert_eq!(trace(&Matrix::zeros(3, 3).unwrap()).unwrap(), 0.0);
        assert!(trace(&Matrix::zeros(2, 3).unwrap()).is_err());
    }

    #[test]
    fn cosine_cases() {
        let v = |d: &[f64]| Vector::new(d.to_vec()).unwrap();
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let u = v(&[0.3, -1.2, 2.5]);
        let u3 = v(&[0.9, -3.6, 7.5]);
        let neg = v(&[-0.3, 1.2, -2.5]);
        assert!((cosine_similarity(&u, &u3).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&u, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&u, &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            cosine_similarity(&u, &v(&[0.0, 0.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
    }
}
