//! Grayscale rasters, regions of interest, simulated noise and PSNR.

use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RoiProblem};

/// Smallest ROI side that can still resolve an endplate.
pub const MIN_ROI_SIDE: usize = 16;

/// Row-major grayscale image with intensities on the unit scale.
///
/// Loaders and the noise model keep values in `[0, 1]`; the constructor
/// itself only demands finite values so synthetic tests can step outside
/// that range.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage { width, height });
        }
        if pixels.len() != width * height {
            return Err(Error::BufferSize { width, height, len: pixels.len() });
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image from 8-bit samples, mapping `k` to `k / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with edge replication outside the image.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self { width: self.width, height: self.height, pixels }
    }

    /// 8-bit quantization `round(clamp(v) * 255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| libm::round(v.clamp(0.0, 1.0) * 255.0) as u8)
            .collect()
    }

    pub(crate) fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle in pixel coordinates, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(img: &GrayImage) -> Self {
        Self::new(0, 0, img.width(), img.height())
    }

    /// Checks that the rectangle is nonempty and lies inside a `width` x `height` image.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && self.x.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y.checked_add(self.h).is_some_and(|b| b <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::Roi { rect: *self, problem: RoiProblem::OutOfBounds })
        }
    }

    /// Bounds check plus the minimum side needed for endplate detection.
    pub fn check_roi(&self, width: usize, height: usize) -> Result<()> {
        self.check_bounds(width, height)?;
        if self.w < MIN_ROI_SIDE || self.h < MIN_ROI_SIDE {
            return Err(Error::Roi { rect: *self, problem: RoiProblem::TooSmall });
        }
        Ok(())
    }

    /// Mirror of this rectangle inside an image of the given width.
    pub fn flip_horizontal(&self, image_width: usize) -> Self {
        Self::new(image_width - self.x - self.w, self.y, self.w, self.h)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

/// Cuts `roi` out of `img`. Output pixel `(i, j)` is input pixel `(roi.x + i, roi.y + j)`.
///
/// Only the bounds are checked here; [`Rect::check_roi`] adds the minimum-size rule
/// for measurement ROIs.
pub fn crop_roi(img: &GrayImage, roi: Rect) -> Result<GrayImage> {
    roi.check_bounds(img.width(), img.height())?;
    let mut pixels = Vec::with_capacity(roi.w * roi.h);
    for y in roi.y..roi.y + roi.h {
        let start = y * img.width() + roi.x;
        pixels.extend_from_slice(&img.pixels()[start..start + roi.w]);
    }
    GrayImage::new(roi.w, roi.h, pixels)
}

/// Additive Gaussian noise; `sigma` is in 8-bit units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed }
    }
}

/// Adds seeded Gaussian noise of std-dev `sigma / 255` and clamps to `[0, 1]`.
///
/// A zero (or negative) sigma returns the input unchanged.
pub fn add_gaussian_noise(img: &GrayImage, spec: NoiseSpec) -> GrayImage {
    if spec.sigma <= 0.0 {
        return img.clone();
    }
    let scale = spec.sigma / 255.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    img.map(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        (v + scale * n).clamp(0.0, 1.0)
    })
}

/// Mean squared error on the 8-bit scale.
pub fn mse_8bit(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.same_dims(test)?;
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| {
            let d = (a - b) * 255.0;
            d * d
        })
        .sum();
    Ok(sum / reference.pixels().len() as f64)
}

/// Peak signal-to-noise ratio in dB, `10 log10(255^2 / MSE)`.
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    let mse = mse_8bit(reference, test)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(255.0 * 255.0 / mse))
}
