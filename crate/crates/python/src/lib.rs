//! Python bindings: `import paneval`.
//!
//! Matrices cross the boundary as lists of rows; images as lists of rows of
//! intensities in [0, 1].

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use paneval::embed::{EmbeddingProvider, FileProvider, ProviderConfig};
use paneval::fid::{CovarianceMode, FeatureMatrix, FidOptions};
use paneval::linalg::DEFAULT_NEG_TOL;
use paneval::{Error, ErrorKind, FeatureFormat, GrayImage, Matrix, Pairing, SsimParams, Vector};
use pyo3::exceptions::{PyArithmeticError, PyConnectionError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Usage => PyValueError::new_err(msg),
        ErrorKind::Io => PyOSError::new_err(msg),
        ErrorKind::Numeric => PyArithmeticError::new_err(msg),
        ErrorKind::Provider => PyConnectionError::new_err(msg),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for paneval::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).py()
}

fn image(rows: &[Vec<f64>]) -> PyResult<GrayImage> {
    let m = matrix(rows)?;
    GrayImage::new(m.rows(), m.cols(), m.as_slice().to_vec()).py()
}

fn image_rows(img: &GrayImage) -> Vec<Vec<f64>> {
    img.pixels().chunks(img.width()).map(<[f64]>::to_vec).collect()
}

fn params(window: usize, sigma: f64, k1: f64, k2: f64, dynamic_range: f64) -> PyResult<SsimParams> {
    let p = SsimParams {
        window_size: window,
        sigma,
        k1,
        k2,
        dynamic_range,
    };
    p.validate().py()?;
    Ok(p)
}

fn fid_options(eps: f64, covariance: &str) -> PyResult<FidOptions> {
    let covariance_mode = match covariance {
        "full" => CovarianceMode::Full,
        "diagonal" => CovarianceMode::Diagonal,
        other => return Err(PyValueError::new_err(format!("unknown covariance mode '{other}'"))),
    };
    let opts = FidOptions { eps, covariance_mode };
    opts.validate().py()?;
    Ok(opts)
}

fn features(rows: &[Vec<f64>]) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(rows).py()
}

fn feature_format(name: &str) -> PyResult<FeatureFormat> {
    name.parse().py()
}

/// Mean SSIM of two images and the per-window map.
#[pyfunction]
#[pyo3(signature = (x, y, window=11, sigma=1.5, k1=0.01, k2=0.03, dynamic_range=1.0))]
#[allow(clippy::too_many_arguments)]
fn ssim(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    window: usize,
    sigma: f64,
    k1: f64,
    k2: f64,
    dynamic_range: f64,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let p = params(window, sigma, k1, k2, dynamic_range)?;
    let (x, y) = (image(&x)?, image(&y)?);
    let r = py.detach(|| paneval::ssim(&x, &y, &p)).py()?;
    Ok((r.mean_ssim, r.ssim_map.to_rows()))
}

/// SSIM over image batches. Returns `{"mean_ssim": float, "pairs": [(i, j, ssim), ...]}`.
#[pyfunction]
#[pyo3(signature = (candidates, targets, pairing="cross", window=11, sigma=1.5, k1=0.01, k2=0.03, dynamic_range=1.0))]
#[allow(clippy::too_many_arguments)]
fn batch_ssim<'py>(
    py: Python<'py>,
    candidates: Vec<Vec<Vec<f64>>>,
    targets: Vec<Vec<Vec<f64>>>,
    pairing: &str,
    window: usize,
    sigma: f64,
    k1: f64,
    k2: f64,
    dynamic_range: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(window, sigma, k1, k2, dynamic_range)?;
    let pairing: Pairing = pairing.parse().py()?;
    let a = candidates.iter().map(|m| image(m)).collect::<PyResult<Vec<_>>>()?;
    let b = targets.iter().map(|m| image(m)).collect::<PyResult<Vec<_>>>()?;
    let r = py.detach(|| paneval::batch_ssim(&a, &b, pairing, &p)).py()?;
    let out = PyDict::new(py);
    out.set_item("mean_ssim", r.mean_ssim)?;
    let pairs: Vec<(usize, usize, f64)> = r.pairs.iter().map(|s| (s.candidate, s.target, s.ssim)).collect();
    out.set_item("pairs", pairs)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (size=11, sigma=1.5))]
fn gaussian_kernel(size: usize, sigma: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(paneval::ssim::gaussian_kernel(size, sigma).py()?.to_rows())
}

/// Decodes an image file to grayscale rows in [0, 1].
#[pyfunction]
fn load_gray(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    Ok(image_rows(&paneval::load_gray(&path).py()?))
}

/// Mean and covariance of a feature batch.
#[pyclass(frozen, module = "paneval")]
struct GaussianStats {
    inner: paneval::GaussianStats,
}

#[pymethods]
impl GaussianStats {
    #[new]
    fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = paneval::GaussianStats::new(Vector::new(mu).py()?, matrix(&sigma)?).py()?;
        Ok(GaussianStats { inner })
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu.as_slice().to_vec()
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        self.inner.sigma.to_rows()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("GaussianStats(dim={})", self.inner.dim())
    }
}

#[pyfunction]
#[pyo3(signature = (features, eps=paneval::fid::DEFAULT_EPS, covariance="full"))]
fn gaussian_stats(features: Vec<Vec<f64>>, eps: f64, covariance: &str) -> PyResult<GaussianStats> {
    let opts = fid_options(eps, covariance)?;
    let inner = paneval::gaussian_stats(&self::features(&features)?, &opts).py()?;
    Ok(GaussianStats { inner })
}

#[pyfunction]
fn frechet_distance(py: Python<'_>, a: &GaussianStats, b: &GaussianStats) -> PyResult<f64> {
    py.detach(|| paneval::frechet_distance(&a.inner, &b.inner)).py()
}

/// FID between two feature batches (rows are samples).
#[pyfunction]
#[pyo3(signature = (candidates, targets, eps=paneval::fid::DEFAULT_EPS, covariance="full"))]
fn fid(py: Python<'_>, candidates: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, eps: f64, covariance: &str) -> PyResult<f64> {
    let opts = fid_options(eps, covariance)?;
    let (a, b) = (features(&candidates)?, features(&targets)?);
    py.detach(|| paneval::fid(&a, &b, &opts)).py()
}

#[pyfunction]
#[pyo3(signature = (a, neg_tol=DEFAULT_NEG_TOL))]
fn sqrtm_psd(a: Vec<Vec<f64>>, neg_tol: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(paneval::linalg::sqrtm_psd(&matrix(&a)?, neg_tol).py()?.to_rows())
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    paneval::linalg::cosine_similarity(&Vector::new(u).py()?, &Vector::new(v).py()?).py()
}

#[pyfunction]
fn plot_score(candidate: Vec<f64>, references: Vec<Vec<f64>>) -> PyResult<f64> {
    let refs = references.into_iter().map(Vector::new).collect::<paneval::Result<Vec<_>>>().py()?;
    paneval::plot_score(&Vector::new(candidate).py()?, &refs).py()
}

#[pyfunction]
#[pyo3(signature = (similarity, plot, gamma=paneval::storyscore::DEFAULT_GAMMA))]
fn story_score(similarity: f64, plot: f64, gamma: f64) -> PyResult<f64> {
    paneval::story_score(similarity, plot, gamma).py()
}

/// Scores a story manifest file. Unpinned embeddings come from `lookup`
/// (a hash-to-vector JSON file) or `endpoint` (an embedding service).
#[pyfunction]
#[pyo3(signature = (path, gamma=None, lookup=None, endpoint=None, timeout=30.0, max_retries=3))]
fn evaluate_manifest<'py>(
    py: Python<'py>,
    path: PathBuf,
    gamma: Option<f64>,
    lookup: Option<PathBuf>,
    endpoint: Option<String>,
    timeout: f64,
    max_retries: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let mut manifest = paneval::StoryCorpusManifest::from_path(&path).py()?;
    if let Some(g) = gamma {
        manifest.gamma = g;
    }
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(PyValueError::new_err("timeout must be > 0"));
    }
    let mut cfg = match (lookup, endpoint) {
        (Some(l), None) => Some(ProviderConfig::file(l)),
        (None, Some(e)) => Some(ProviderConfig::http(e)),
        (None, None) => None,
        _ => return Err(PyValueError::new_err("give either lookup or endpoint, not both")),
    };
    if let Some(cfg) = cfg.as_mut() {
        cfg.timeout = Duration::from_secs_f64(timeout);
        cfg.max_retries = max_retries;
    }
    let row = py
        .detach(|| {
            let provider: Box<dyn EmbeddingProvider> = match &cfg {
                Some(cfg) => cfg.build()?,
                None => Box::new(FileProvider::from_map(HashMap::new())),
            };
            paneval::evaluate_manifest(&manifest, provider.as_ref())
        })
        .py()?;
    let out = PyDict::new(py);
    out.set_item("label", row.label)?;
    out.set_item("similarity", row.similarity)?;
    out.set_item("plot", row.plot)?;
    out.set_item("story", row.story)?;
    Ok(out)
}

#[pyfunction]
fn content_hash(text: &str) -> String {
    paneval::content_hash(text)
}

#[pyfunction]
#[pyo3(signature = (path, format="binary"))]
fn read_features(path: PathBuf, format: &str) -> PyResult<Vec<Vec<f64>>> {
    Ok(paneval::read_features(&path, feature_format(format)?).py()?.matrix().to_rows())
}

#[pyfunction]
#[pyo3(signature = (rows, path, format="binary"))]
fn write_features(rows: Vec<Vec<f64>>, path: PathBuf, format: &str) -> PyResult<()> {
    paneval::write_features(&features(&rows)?, &path, feature_format(format)?).py()
}

#[pymodule]
#[pyo3(name = "paneval")]
fn paneval_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<GaussianStats>()?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(batch_ssim, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(load_gray, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_stats, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fid, m)?)?;
    m.add_function(wrap_pyfunction!(sqrtm_psd, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(plot_score, m)?)?;
    m.add_function(wrap_pyfunction!(story_score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(content_hash, m)?)?;
    m.add_function(wrap_pyfunction!(read_features, m)?)?;
    m.add_function(wrap_pyfunction!(write_features, m)?)?;
    Ok(())
}
