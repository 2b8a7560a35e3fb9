//! Fréchet distance between Gaussian fits of two feature batches.
//!
//! The cross term `Tr((S1 S2)^{1/2})` is evaluated as
//! `Tr((S1^{1/2} S2 S1^{1/2})^{1/2})`, which has the same eigenvalues but only
//! ever takes square roots of symmetric PSD matrices.
//!
//! [`fid`] has a second route for the common case of tiny batches in a large
//! feature space (`N1 + N2 < D`): both covariances are `eps*I` plus a low-rank
//! term, so the product acts as `eps^2 * I` outside the span of the centered
//! features and the whole computation reduces to that span.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, DEFAULT_NEG_TOL};

/// Negative distances down to this value are rounding noise and reported as 0.
pub const NEGATIVE_CLAMP: f64 = 1e-6;

/// Default covariance regularizer.
pub const DEFAULT_EPS: f64 = 1e-6;

/// `N x D` matrix of deep features, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(matrix: Matrix) -> Self {
        FeatureMatrix(matrix)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Matrix::from_rows(rows).map(FeatureMatrix)
    }

    pub fn count(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl From<Matrix> for FeatureMatrix {
    fn from(m: Matrix) -> Self {
        FeatureMatrix(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    #[default]
    Full,
    /// Off-diagonal covariance entries are discarded.
    Diagonal,
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceMode::Full => "full",
            CovarianceMode::Diagonal => "diagonal",
        })
    }
}

impl FromStr for CovarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CovarianceMode::Full),
            "diagonal" => Ok(CovarianceMode::Diagonal),
            other => Err(Error::invalid(format!("unknown covariance mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidOptions {
    pub eps: f64,
    pub covariance_mode: CovarianceMode,
}

impl Default for FidOptions {
    fn default() -> Self {
        FidOptions {
            eps: DEFAULT_EPS,
            covariance_mode: CovarianceMode::Full,
        }
    }
}

impl FidOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!(
                "eps must be finite and >= 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Mean and covariance of a feature batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mu: Vector,
    pub sigma: Matrix,
}

impl GaussianStats {
    pub fn new(mu: Vector, sigma: Matrix) -> Result<Self> {
        if !sigma.is_square() || sigma.rows() != mu.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mean has dim {} but covariance is {}x{}",
                mu.dim(),
                sigma.rows(),
                sigma.cols()
            )));
        }
        Ok(GaussianStats { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.sigma.get(i, j) == 0.0))
    }
}

/// Fits `(mu, sigma)` to a feature batch; `sigma` is the sample covariance plus `eps * I`.
pub fn gaussian_stats(features: &FeatureMatrix, opts: &FidOptions) -> Result<GaussianStats> {
    opts.validate()?;
    let rows = features.matrix();
    if rows.rows() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: rows.rows(),
        });
    }
    let mu = linalg::mean_vector(rows)?;
    let mut sigma = match opts.covariance_mode {
        CovarianceMode::Full => linalg::covariance(rows)?,
        CovarianceMode::Diagonal => {
            let full = linalg::covariance(rows)?;
            Matrix::from_diagonal(&full.diagonal())?
        }
    };
    sigma.add_to_diagonal(opts.eps);
    GaussianStats::new(mu, sigma)
}

fn finish_distance(value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::Numeric(format!("Fréchet distance is {value}")));
    }
    if value < 0.0 {
        if value >= -NEGATIVE_CLAMP {
            return Ok(0.0);
        }
        return Err(Error::Numeric(format!(
            "Fréchet distance {value:e} is negative beyond rounding tolerance"
        )));
    }
    Ok(value)
}

/// `||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Gaussian stats have dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = a.mu.squared_distance(&b.mu)?;
    let tr_a = linalg::trace(&a.sigma)?;
    let tr_b = linalg::trace(&b.sigma)?;

    let cross = if a.is_diagonal() && b.is_diagonal() {
        let da = a.sigma.diagonal();
        let db = b.sigma.diagonal();
        if let Some(v) = da.iter().chain(&db).find(|v| **v < 0.0) {
            return Err(Error::NotPsd {
                eigenvalue: *v,
                tolerance: 0.0,
            });
        }
        da.iter().zip(&db).map(|(x, y)| (x * y).sqrt()).sum::<f64>()
    } else {
        check_symmetric(&b.sigma)?;
        let root_a = linalg::sqrtm_psd(&a.sigma, DEFAULT_NEG_TOL)?;
        let inner = symmetrize(&root_a.matmul(&b.sigma)?.matmul(&root_a)?);
        linalg::trace_sqrt_psd(&inner, DEFAULT_NEG_TOL)?
    };
    finish_distance(mean_term + tr_a + tr_b - 2.0 * cross)
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if m.max_asymmetry() > 1e-8 * m.frobenius_norm() {
        return Err(Error::invalid("covariance matrix is not symmetric"));
    }
    Ok(())
}

fn symmetrize(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut data = m.as_slice().to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (data[i * n + j] + data[j * n + i]);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Matrix::new(n, n, data).expect("symmetrized matrix keeps shape and finiteness")
}

/// FID between two feature batches.
pub fn fid(candidates: &FeatureMatrix, targets: &FeatureMatrix, opts: &FidOptions) -> Result<f64> {
    opts.validate()?;
    if candidates.dim() != targets.dim() {
        return Err(Error::DimensionMismatch(format!(
            "candidate features have dim {} but target features have dim {}",
            candidates.dim(),
            targets.dim()
        )));
    }
    for batch in [candidates, targets] {
        if batch.count() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: batch.count(),
            });
        }
    }
    let low_rank = opts.covariance_mode == CovarianceMode::Full
        && candidates.count() + targets.count() < candidates.dim();
    if low_rank {
        return fid_low_rank(candidates, targets, opts.eps);
    }
    let a = gaussian_stats(candidates, opts)?;
    let b = gaussian_stats(targets, opts)?;
    frechet_distance(&a, &b)
}

/// Centered features scaled by `1/sqrt(N-1)`, stored as columns of a `D x N`
/// column-major buffer, so that `sigma = F F^T + eps I`.
fn scaled_deviations(features: &FeatureMatrix) -> Result<(Vector, Vec<Vec<f64>>)> {
    let m = features.matrix();
    let mu = linalg::mean_vector(m)?;
    let scale = 1.0 / ((m.rows() - 1) as f64).sqrt();
    let cols = m
        .row_iter()
        .map(|row| {
            row.iter()
                .zip(mu.as_slice())
                .map(|(x, u)| (x - u) * scale)
                .collect()
        })
        .collect();
    Ok((mu, cols))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the span of `cols` via Gram-Schmidt with one round of
/// reorthogonalization; numerically dependent columns are dropped.
fn orthonormal_basis(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for col in cols {
        let original = dot(col, col).sqrt();
        if original == 0.0 {
            continue;
        }
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let residual = dot(&v, &v).sqrt();
        if residual <= 1e-12 * original {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= residual);
        basis.push(v);
    }
    basis
}

/// `eps I + (Q^T F)(Q^T F)^T`, the covariance restricted to span(Q).
fn restricted_covariance(basis: &[Vec<f64>], devs: &[Vec<f64>], eps: f64) -> Result<Matrix> {
    let r = basis.len();
    let proj: Vec<Vec<f64>> = devs
        .iter()
        .map(|f| basis.iter().map(|q| dot(q, f)).collect())
        .collect();
    let mut data = vec![0.0; r * r];
    for i in 0..r {
        for j in i..r {
            let v: f64 = proj.iter().map(|p| p[i] * p[j]).sum();
            data[i * r + j] = v;
            data[j * r + i] = v;
        }
        data[i * r + i] += eps;
    }
    Matrix::new(r, r, data)
}

fn fid_low_rank(candidates: &FeatureMatrix, targets: &FeatureMatrix, eps: f64) -> Result<f64> {
    let d = candidates.dim();
    let (mu_a, dev_a) = scaled_deviations(candidates)?;
    let (mu_b, dev_b) = scaled_deviations(targets)?;
    let all: Vec<Vec<f64>> = dev_a.iter().chain(&dev_b).cloned().collect();
    let basis = orthonormal_basis(&all);
    let r = basis.len();

    let mean_term = mu_a.squared_distance(&mu_b)?;
    let frob = |devs: &[Vec<f64>]| devs.iter().map(|f| dot(f, f)).sum::<f64>();
    let tr_a = d as f64 * eps + frob(&dev_a);
    let tr_b = d as f64 * eps + frob(&dev_b);

    let outside = (d - r) as f64 * eps;
    let inside = if r == 0 {
        0.0
    } else {
        let pa = restricted_covariance(&basis, &dev_a, eps)?;
        let pb = restricted_covariance(&basis, &dev_b, eps)?;
        let root_a = linalg::sqrtm_psd(&pa, DEFAULT_NEG_TOL)?;
        let inner = symmetrize(&root_a.matmul(&pb)?.matmul(&root_a)?);
        linalg::trace_sqrt_psd(&inner, DEFAULT_NEG_TOL)?
    };
    finish_distance(mean_term + tr_a + tr_b - 2.0 * (outside + inside))
}
