//! Otsu threshold selection and Canny edge detection.
//!
//! The Canny high threshold comes from Otsu's method run on the histogram of
//! gradient magnitudes rescaled by their maximum; the low threshold is a fixed
//! ratio of the high one.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::enhance::{histogram, LEVELS};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Binary edge raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    edges: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, edges: vec![false; width * height] }
    }

    pub fn from_points(width: usize, height: usize, points: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut map = Self::empty(width, height);
        for (x, y) in points {
            if x < width && y < height {
                map.edges[y * width + x] = true;
            }
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.edges
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.edges.iter().any(|&e| e)
    }

    /// Coordinates of edge pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.edges.iter().enumerate().filter(|(_, &e)| e).map(move |(i, _)| (i % w, i / w))
    }

    /// 0 / 255 bytes, for dumping as an image.
    pub fn to_u8(&self) -> Vec<u8> {
        self.edges.iter().map(|&e| if e { 255 } else { 0 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CannyConfig {
    /// Gaussian pre-smoothing std-dev in pixels; 0 disables smoothing.
    pub blur_sigma: f64,
    /// Low hysteresis threshold as a fraction of the high one.
    pub low_ratio: f64,
    /// Explicit high threshold on gradient magnitude, bypassing Otsu.
    pub high_override: Option<f64>,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self { blur_sigma: 1.4, low_ratio: 0.5, high_override: None }
    }
}

impl CannyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma.is_finite() && self.blur_sigma >= 0.0) {
            return Err(Error::InvalidConfig("blur_sigma must be non-negative"));
        }
        if !(self.low_ratio > 0.0 && self.low_ratio <= 1.0) {
            return Err(Error::InvalidConfig("low_ratio must lie in (0, 1]"));
        }
        if let Some(h) = self.high_override {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidConfig("high_override must be positive"));
            }
        }
        Ok(())
    }
}

/// Otsu split of a histogram: the bin `b` maximizing the between-class variance
/// of `[0, b]` against `(b, end]`.
///
/// Splits are searched between the lowest and highest occupied bins and ties go
/// to the smallest bin, so a single-level histogram returns that level.
pub fn otsu_bin(hist: &[u64]) -> usize {
    let Some(lo) = hist.iter().position(|&c| c > 0) else {
        return 0;
    };
    let hi = hist.iter().rposition(|&c| c > 0).unwrap_or(lo);
    let total: i128 = hist.iter().map(|&c| c as i128).sum();
    let total_sum: i128 = hist.iter().enumerate().map(|(i, &c)| i as i128 * c as i128).sum();

    let (mut n0, mut s0) = (0i128, 0i128);
    for &c in &hist[..lo] {
        n0 += c as i128;
    }
    let mut best = (lo, -1.0f64);
    for (b, &c) in hist.iter().enumerate().take(hi + 1).skip(lo) {
        n0 += c as i128;
        s0 += b as i128 * c as i128;
        let n1 = total - n0;
        // (N s0 - S n0)^2 / (n0 n1) is N^2 times the between-class variance.
        let var = if n0 == 0 || n1 == 0 {
            0.0
        } else {
            let diff = (total * s0 - total_sum * n0) as f64;
            diff * diff / (n0 as f64 * n1 as f64)
        };
        if var > best.1 {
            best = (b, var);
        }
    }
    best.0
}

/// Otsu threshold of the image's 256-level histogram, as an intensity `(b + 0.5) / 255`.
pub fn otsu_threshold(img: &GrayImage) -> f64 {
    (otsu_bin(&histogram(img, LEVELS)) as f64 + 0.5) / 255.0
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * img.get_clamped(x as isize + i as isize - r, y as isize))
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| {
                    let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                    kv * tmp[yy * w + x]
                })
                .sum();
        }
    }
    GrayImage::new(w, h, out).expect("blur preserves dimensions")
}

/// Sobel gradients and magnitude with edge-replicated borders.
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl Gradients {
    pub fn compute(img: &GrayImage, blur_sigma: f64) -> Self {
        let src = gaussian_blur(img, blur_sigma);
        let (w, h) = (src.width(), src.height());
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        let mut magnitude = vec![0.0; w * h];
        let p = |x: isize, y: isize| src.get_clamped(x, y);
        for y in 0..h as isize {
            for x in 0..w as isize {
                let dx = (p(x + 1, y - 1) + 2.0 * p(x + 1, y) + p(x + 1, y + 1))
                    - (p(x - 1, y - 1) + 2.0 * p(x - 1, y) + p(x - 1, y + 1));
                let dy = (p(x - 1, y + 1) + 2.0 * p(x, y + 1) + p(x + 1, y + 1))
                    - (p(x - 1, y - 1) + 2.0 * p(x, y - 1) + p(x + 1, y - 1));
                let i = y as usize * w + x as usize;
                gx[i] = dx;
                gy[i] = dy;
                magnitude[i] = libm::sqrt(dx * dx + dy * dy);
            }
        }
        Self { width: w, height: h, gx, gy, magnitude }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }

    /// High threshold chosen by Otsu on magnitudes rescaled to `[0, 1]`;
    /// `None` when the image has no gradient at all.
    pub fn otsu_high(&self) -> Option<f64> {
        let max = self.max_magnitude();
        if max <= 0.0 {
            return None;
        }
        let normalized = GrayImage::new(self.width, self.height, self.magnitude.iter().map(|m| m / max).collect())
            .expect("gradient image matches input dimensions");
        Some(otsu_threshold(&normalized) * max)
    }

    /// Non-maximum suppression along the gradient direction quantized to 0/45/90/135 degrees.
    ///
    /// A pixel survives when it is strictly above its backward neighbour and not
    /// below its forward one, so a plateau two pixels wide keeps exactly one.
    /// The outer ring never survives.
    fn suppress(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; w * h];
        if w < 3 || h < 3 {
            return out;
        }
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                let m = self.magnitude[i];
                if m <= 0.0 {
                    continue;
                }
                let mut angle = libm::atan2(self.gy[i], self.gx[i]).to_degrees();
                if angle < 0.0 {
                    angle += 180.0;
                }
                let (back, fwd) = if !(22.5..157.5).contains(&angle) {
                    (i - 1, i + 1)
                } else if angle < 67.5 {
                    (i - w - 1, i + w + 1)
                } else if angle < 112.5 {
                    (i - w, i + w)
                } else {
                    (i - w + 1, i + w - 1)
                };
                if m > self.magnitude[back] && m >= self.magnitude[fwd] {
                    out[i] = m;
                }
            }
        }
        out
    }

    /// Thin, then keep weak pixels 8-connected to a strong one.
    pub fn edges(&self, high: f64, low: f64) -> EdgeMap {
        let (w, h) = (self.width, self.height);
        let thin = self.suppress();
        let mut map = EdgeMap::empty(w, h);
        let mut queue = VecDeque::new();
        for (i, &m) in thin.iter().enumerate() {
            if m > 0.0 && m >= high {
                map.edges[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !map.edges[j] && thin[j] > 0.0 && thin[j] >= low {
                        map.edges[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        map
    }
}

/// Canny with an explicit high threshold on gradient magnitude; low is `low_ratio * high`.
pub fn canny(img: &GrayImage, cfg: &CannyConfig, high: f64) -> Result<EdgeMap> {
    cfg.validate()?;
    if !(high.is_finite() && high > 0.0) {
        return Err(Error::InvalidConfig("high threshold must be positive"));
    }
    let grad = Gradients::compute(img, cfg.blur_sigma);
    Ok(grad.edges(high, cfg.low_ratio * high))
}

/// High threshold `canny_otsu` would use for this image, or `None` for a flat image.
pub fn otsu_high_threshold(img: &GrayImage, cfg: &CannyConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    if let Some(h) = cfg.high_override {
        return Ok(Some(h));
    }
    Ok(Gradients::compute(img, cfg.blur_sigma).otsu_high())
}

/// Canny with the high threshold picked by Otsu on the gradient magnitudes
/// (unless `cfg.high_override` is set). A flat image yields an empty map.
pub fn canny_otsu(img: &GrayImage, cfg: &CannyConfig) -> Result<EdgeMap> {
    cfg.validate()?;
    let grad = Gradients::compute(img, cfg.blur_sigma);
    let high = match cfg.high_override {
        Some(h) => h,
        None => match grad.otsu_high() {
            Some(h) => h,
            None => return Ok(EdgeMap::empty(img.width(), img.height())),
        },
    };
    Ok(grad.edges(high, cfg.low_ratio * high))
}
