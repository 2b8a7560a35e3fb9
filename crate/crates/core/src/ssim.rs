//! Structural similarity with a Gaussian window.
//!
//! Local statistics are Gaussian-weighted means over every fully contained
//! window position (valid mode, no padding). Variances and the covariance use
//! the uncentered form `E[xy] - E[x]E[y]`. The Gaussian window is separable,
//! so the hot path filters rows then columns with the 1-D factor; the generic
//! 2-D [`convolve_valid`] is kept for arbitrary kernels.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A single-channel image with pixel values in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "image must be at least 1x1, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::invalid(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!(
                "pixel {i} = {} outside [0, 1]",
                pixels[i]
            )));
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        GrayImage::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

/// SSIM constants and window shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window_size: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window_size: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.window_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "window size must be odd and >= 1, got {}",
                self.window_size
            )));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("k1", self.k1),
            ("k2", self.k2),
            ("dynamic range", self.dynamic_range),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Output of [`ssim`]: the local SSIM map and its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimResult {
    pub mean_ssim: f64,
    pub ssim_map: Matrix,
}

/// How two batches are matched up in [`batch_ssim`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Every candidate against every target.
    #[default]
    Cross,
    /// Candidate `i` against target `i`.
    Indexed,
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Cross => "cross",
            Pairing::Indexed => "indexed",
        })
    }
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross" => Ok(Pairing::Cross),
            "indexed" => Ok(Pairing::Indexed),
            other => Err(Error::invalid(format!("unknown pairing '{other}'"))),
        }
    }
}

/// Score for one candidate/target pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub candidate: usize,
    pub target: usize,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSsim {
    pub pairs: Vec<PairScore>,
    pub mean_ssim: f64,
}

fn check_kernel_shape(size: usize, sigma: f64) -> Result<()> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kernel size must be odd and >= 1, got {size}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(())
}

/// Normalized `size x size` Gaussian window centred on the middle pixel.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Matrix> {
    check_kernel_shape(size, sigma)?;
    let half = (size / 2) as f64;
    let denom = 2.0 * sigma * sigma;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        let dy = i as f64 - half;
        for j in 0..size {
            let dx = j as f64 - half;
            data.push((-(dx * dx + dy * dy) / denom).exp());
        }
    }
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= total);
    Matrix::new(size, size, data)
}

/// 1-D factor of [`gaussian_kernel`]; its outer product with itself is the 2-D window.
fn gaussian_kernel_1d(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / denom).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Valid-mode 2-D cross-correlation of `img` with a square kernel.
pub fn convolve_valid(img: &GrayImage, kernel: &Matrix) -> Result<Matrix> {
    if !kernel.is_square() {
        return Err(Error::invalid(format!(
            "kernel must be square, got {}x{}",
            kernel.rows(),
            kernel.cols()
        )));
    }
    let k = kernel.rows();
    if img.height < k || img.width < k {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than the {k}x{k} kernel",
            img.height, img.width
        )));
    }
    let out_h = img.height - k + 1;
    let out_w = img.width - k + 1;
    let mut out = vec![0.0; out_h * out_w];
    for (ki, krow) in kernel.row_iter().enumerate() {
        for (kj, &w) in krow.iter().enumerate() {
            for i in 0..out_h {
                let src = &img.pixels[(i + ki) * img.width + kj..][..out_w];
                let dst = &mut out[i * out_w..(i + 1) * out_w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    Matrix::new(out_h, out_w, out)
}

/// Separable valid-mode filter of a `height x width` plane.
fn filter_separable(plane: &[f64], height: usize, width: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let out_w = width - n + 1;
    let out_h = height - n + 1;
    let mut horiz = vec![0.0; height * out_w];
    for r in 0..height {
        let src = &plane[r * width..(r + 1) * width];
        let dst = &mut horiz[r * out_w..(r + 1) * out_w];
        for (t, &w) in k.iter().enumerate() {
            for (d, s) in dst.iter_mut().zip(&src[t..t + out_w]) {
                *d += w * s;
            }
        }
    }
    let mut out = vec![0.0; out_h * out_w];
    for r in 0..out_h {
        let dst = &mut out[r * out_w..(r + 1) * out_w];
        for (t, &w) in k.iter().enumerate() {
            let src = &horiz[(r + t) * out_w..(r + t + 1) * out_w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Per-image windowed statistics reused across every pair an image takes part in.
struct WindowStats {
    mean: Vec<f64>,
    mean_sq: Vec<f64>,
}

impl WindowStats {
    fn compute(img: &GrayImage, k: &[f64]) -> Self {
        let sq: Vec<f64> = img.pixels.iter().map(|p| p * p).collect();
        WindowStats {
            mean: filter_separable(&img.pixels, img.height, img.width, k),
            mean_sq: filter_separable(&sq, img.height, img.width, k),
        }
    }
}

fn check_pair(x: &GrayImage, y: &GrayImage, params: &SsimParams) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::DimensionMismatch(format!(
            "images are {}x{} and {}x{}",
            x.height, x.width, y.height, y.width
        )));
    }
    let w = params.window_size;
    if x.height < w || x.width < w {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than the {w}x{w} window",
            x.height, x.width
        )));
    }
    Ok(())
}

fn ssim_from_stats(
    x: &GrayImage,
    y: &GrayImage,
    sx: &WindowStats,
    sy: &WindowStats,
    k: &[f64],
    params: &SsimParams,
) -> Result<SsimResult> {
    let prod: Vec<f64> = x.pixels.iter().zip(&y.pixels).map(|(a, b)| a * b).collect();
    let mean_xy = filter_separable(&prod, x.height, x.width, k);
    let c1 = params.c1();
    let c2 = params.c2();
    let map: Vec<f64> = (0..mean_xy.len())
        .map(|i| {
            let mx = sx.mean[i];
            let my = sy.mean[i];
            let vx = sx.mean_sq[i] - mx * mx;
            let vy = sy.mean_sq[i] - my * my;
            let cov = mean_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .collect();
    let mean_ssim = map.iter().sum::<f64>() / map.len() as f64;
    let n = params.window_size;
    let ssim_map = Matrix::new(x.height - n + 1, x.width - n + 1, map).map_err(|_| {
        Error::Numeric("SSIM map contains non-finite values".into())
    })?;
    Ok(SsimResult {
        mean_ssim,
        ssim_map,
    })
}

/// Mean structural similarity between two equally sized images.
pub fn ssim(x: &GrayImage, y: &GrayImage, params: &SsimParams) -> Result<SsimResult> {
    params.validate()?;
    check_pair(x, y, params)?;
    let k = gaussian_kernel_1d(params.window_size, params.sigma);
    let sx = WindowStats::compute(x, &k);
    let sy = WindowStats::compute(y, &k);
    ssim_from_stats(x, y, &sx, &sy, &k, params)
}

/// SSIM over two image batches.
///
/// Pairs are evaluated in parallel; the aggregate is summed in pair order so
/// the result does not depend on scheduling.
pub fn batch_ssim(
    candidates: &[GrayImage],
    targets: &[GrayImage],
    pairing: Pairing,
    params: &SsimParams,
) -> Result<BatchSsim> {
    params.validate()?;
    if candidates.is_empty() || targets.is_empty() {
        return Err(Error::invalid("SSIM batches must be non-empty"));
    }
    let first = &candidates[0];
    for img in candidates.iter().chain(targets) {
        check_pair(first, img, params)?;
    }
    let index_pairs: Vec<(usize, usize)> = match pairing {
        Pairing::Cross => (0..candidates.len())
            .flat_map(|i| (0..targets.len()).map(move |j| (i, j)))
            .collect(),
        Pairing::Indexed => {
            if candidates.len() != targets.len() {
                return Err(Error::invalid(format!(
                    "indexed pairing needs equal batch sizes, got {} candidates and {} targets",
                    candidates.len(),
                    targets.len()
                )));
            }
            (0..candidates.len()).map(|i| (i, i)).collect()
        }
    };

    let k = gaussian_kernel_1d(params.window_size, params.sigma);
    let cand_stats: Vec<WindowStats> = candidates
        .par_iter()
        .map(|img| WindowStats::compute(img, &k))
        .collect();
    let targ_stats: Vec<WindowStats> = targets
        .par_iter()
        .map(|img| WindowStats::compute(img, &k))
        .collect();

    let pairs = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            ssim_from_stats(
                &candidates[i],
                &targets[j],
                &cand_stats[i],
                &targ_stats[j],
                &k,
                params,
            )
            .map(|r| PairScore {
                candidate: i,
                target: j,
                ssim: r.mean_ssim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_ssim = pairs.iter().map(|p| p.ssim).sum::<f64>() / pairs.len() as f64;
    Ok(BatchSsim { pairs, mean_ssim })
}
