//! Image decoding into normalized grayscale, and batch assembly.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageReader};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssim::GrayImage;

/// Rec. 601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizePolicy {
    /// Reject batches with mixed dimensions.
    #[default]
    Strict,
    /// Resample every image to the first image's size.
    BilinearToFirst,
}

impl fmt::Display for ResizePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResizePolicy::Strict => "strict",
            ResizePolicy::BilinearToFirst => "bilinear",
        })
    }
}

impl FromStr for ResizePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(ResizePolicy::Strict),
            "bilinear" | "bilinear_to_first" => Ok(ResizePolicy::BilinearToFirst),
            other => Err(Error::invalid(format!("unknown resize policy '{other}'"))),
        }
    }
}

/// Non-empty list of equally sized images, in load order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch {
    images: Vec<GrayImage>,
    source_paths: Vec<PathBuf>,
}

impl ImageBatch {
    pub fn new(images: Vec<GrayImage>, source_paths: Vec<PathBuf>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("image batch must be non-empty"));
        }
        if images.len() != source_paths.len() {
            return Err(Error::invalid("one source path per image is required"));
        }
        let dims = images[0].dims();
        if let Some(i) = images.iter().position(|im| im.dims() != dims) {
            return Err(Error::DimensionMismatch(format!(
                "image {i} is {}x{}, batch is {}x{}",
                images[i].height(),
                images[i].width(),
                dims.0,
                dims.1
            )));
        }
        Ok(ImageBatch {
            images,
            source_paths,
        })
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn source_paths(&self) -> &[PathBuf] {
        &self.source_paths
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }
}

fn luma(rgb: [f64; 3]) -> f64 {
    LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2]
}

/// Composites a channel over white: `c * a + 1 * (1 - a)`, everything in [0, 1].
fn over_white(c: f64, a: f64) -> f64 {
    c * a + (1.0 - a)
}

/// Converts a decoded image to normalized luma.
pub fn to_gray(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b
            .pixels()
            .map(|p| over_white(p.0[0] as f64 / 255.0, p.0[1] as f64 / 255.0))
            .collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| luma(p.0.map(f64::from)) / 255.0)
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| {
                let a = p.0[3] as f64 / 255.0;
                let c = [0, 1, 2].map(|i| over_white(p.0[i] as f64 / 255.0, a));
                luma(c)
            })
            .collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b
            .pixels()
            .map(|p| over_white(p.0[0] as f64 / 65535.0, p.0[1] as f64 / 65535.0))
            .collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| luma(p.0.map(f64::from)) / 65535.0)
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| {
                let a = p.0[3] as f64 / 65535.0;
                let c = [0, 1, 2].map(|i| over_white(p.0[i] as f64 / 65535.0, a));
                luma(c)
            })
            .collect(),
        other => other
            .to_rgba32f()
            .pixels()
            .map(|p| {
                let v = p.0.map(|c| (c as f64).clamp(0.0, 1.0));
                luma([0, 1, 2].map(|i| over_white(v[i], v[3])))
            })
            .collect(),
    };
    // weights sum to 1 but rounding can step just outside the unit interval
    let px = px.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    GrayImage::new(h, w, px)
}

/// Decodes a PNG or JPEG file into a normalized grayscale image.
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let decode_err = |message: String| Error::Decode {
        path: path.to_owned(),
        message,
    };
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))?;
    to_gray(&img).map_err(|e| decode_err(e.to_string()))
}

/// Bilinear resampling with pixel-centre alignment and edge clamping.
pub fn resize_bilinear(img: &GrayImage, height: usize, width: usize) -> Result<GrayImage> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("target size must be at least 1x1"));
    }
    if img.dims() == (height, width) {
        return Ok(img.clone());
    }
    let axis = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let rows = axis(img.height(), height);
    let cols = axis(img.width(), width);
    let mut out = Vec::with_capacity(height * width);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            let top = lerp(img.get(r0, c0), img.get(r0, c1), fx);
            let bottom = lerp(img.get(r1, c0), img.get(r1, c1), fx);
            out.push(lerp(top, bottom, fy).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(height, width, out)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        a
    } else {
        a + (b - a) * t
    }
}

/// Loads images in path order and validates (or resamples) their sizes.
pub fn load_batch<P: AsRef<Path> + Sync>(paths: &[P], policy: ResizePolicy) -> Result<ImageBatch> {
    if paths.is_empty() {
        return Err(Error::invalid("no image paths given"));
    }
    let images = paths
        .par_iter()
        .map(|p| load_gray(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let source_paths: Vec<PathBuf> = paths.iter().map(|p| p.as_ref().to_owned()).collect();
    let (h, w) = images[0].dims();
    let images = match policy {
        ResizePolicy::Strict => {
            let offenders: Vec<String> = images
                .iter()
                .zip(&source_paths)
                .filter(|(im, _)| im.dims() != (h, w))
                .map(|(im, p)| format!("{} ({}x{})", p.display(), im.height(), im.width()))
                .collect();
            if !offenders.is_empty() {
                return Err(Error::DimensionMismatch(format!(
                    "expected {h}x{w} like {}, got: {}",
                    source_paths[0].display(),
                    offenders.join(", ")
                )));
            }
            images
        }
        ResizePolicy::BilinearToFirst => images
            .par_iter()
            .map(|im| resize_bilinear(im, h, w))
            .collect::<Result<Vec<_>>>()?,
    };
    ImageBatch::new(images, source_paths)
}
