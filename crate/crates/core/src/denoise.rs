//! Non-local denoising: weighted mean (NLM), weighted Euclidean median of
//! patches (NLEM) and weighted trimmed mean of candidate values (NLETM).
//!
//! All three share one candidate search. For a pixel `p` every pixel `q` of
//! the `S x S` window around `p` (clipped at the image border, `p` included)
//! is a candidate with weight `exp(-d(p, q) / h^2)`, where `d` is the mean
//! squared difference of the two `R x R` patches. Patches replicate edge
//! pixels. The filters differ only in how the weighted candidates are
//! reduced to one output value.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rows::fill_rows;

const WEISZFELD_EPS: f64 = 1e-12;

/// Parameters shared by the non-local filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlConfig {
    /// Patch side is `2 * patch_radius + 1`.
    pub patch_radius: usize,
    /// Search window side is `2 * search_radius + 1`.
    pub search_radius: usize,
    /// Weight decay, in the same units as a patch distance's square root.
    pub h: f64,
    /// Total fraction of candidates discarded by NLETM, half from each tail.
    pub trim_fraction: f64,
    /// Relative change at which the Weiszfeld iteration of NLEM stops.
    pub median_tol: f64,
    pub median_max_iter: usize,
}

impl Default for NlConfig {
    fn default() -> Self {
        Self::for_noise_sigma(10.0)
    }
}

impl NlConfig {
    /// Standard setting for noise of std-dev `sigma` (8-bit units): 3x3 patches,
    /// 21x21 search window, `h = 10 sigma / 255`, 30% trimming.
    pub fn for_noise_sigma(sigma: f64) -> Self {
        Self {
            patch_radius: 1,
            search_radius: 10,
            h: 10.0 * sigma / 255.0,
            trim_fraction: 0.30,
            median_tol: 1e-6,
            median_max_iter: 50,
        }
    }

    pub fn patch_side(&self) -> usize {
        2 * self.patch_radius + 1
    }

    pub fn window_side(&self) -> usize {
        2 * self.search_radius + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.search_radius == 0 {
            return Err(Error::InvalidConfig("search_radius must be at least 1"));
        }
        if self.patch_radius > self.search_radius {
            return Err(Error::InvalidConfig("patch must fit inside the search window"));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidConfig("h must be positive"));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::InvalidConfig("trim_fraction must lie in [0, 1)"));
        }
        if !(self.median_tol.is_finite() && self.median_tol > 0.0) {
            return Err(Error::InvalidConfig("median_tol must be positive"));
        }
        if self.median_max_iter == 0 {
            return Err(Error::InvalidConfig("median_max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Which non-local filter to run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denoiser {
    Nlm,
    Nlem,
    #[default]
    Nletm,
}

impl Denoiser {
    pub const ALL: [Denoiser; 3] = [Denoiser::Nlm, Denoiser::Nlem, Denoiser::Nletm];

    pub fn apply(self, img: &GrayImage, cfg: &NlConfig) -> Result<GrayImage> {
        match self {
            Denoiser::Nlm => nlm(img, cfg),
            Denoiser::Nlem => nlem(img, cfg),
            Denoiser::Nletm => nletm(img, cfg),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Denoiser::Nlm => "nlm",
            Denoiser::Nlem => "nlem",
            Denoiser::Nletm => "nletm",
        }
    }
}

impl fmt::Display for Denoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Denoiser {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nlm" => Ok(Denoiser::Nlm),
            "nlem" => Ok(Denoiser::Nlem),
            "nletm" => Ok(Denoiser::Nletm),
            _ => Err(Error::InvalidConfig("denoiser must be one of nlm, nlem, nletm")),
        }
    }
}

/// An `R x R` neighbourhood, edge-replicated at the image border.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: (usize, usize),
    pub values: Vec<f64>,
}

impl Patch {
    pub fn extract(img: &GrayImage, center: (usize, usize), radius: usize) -> Self {
        let r = radius as isize;
        let (cx, cy) = (center.0 as isize, center.1 as isize);
        let mut values = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
        for dy in -r..=r {
            for dx in -r..=r {
                values.push(img.get_clamped(cx + dx, cy + dy));
            }
        }
        Self { center, values }
    }
}

/// Mean squared difference between the patches around `p` and `q`.
pub fn patch_distance(img: &GrayImage, p: (usize, usize), q: (usize, usize), r: usize) -> f64 {
    let a = Patch::extract(img, p, r);
    let b = Patch::extract(img, q, r);
    let sum: f64 = a.values.iter().zip(&b.values).map(|(u, v)| (u - v) * (u - v)).sum();
    sum / a.values.len() as f64
}

/// Unnormalized similarity weight `exp(-d / h^2)`.
#[inline]
pub fn weight(d: f64, h: f64) -> f64 {
    libm::exp(-d / (h * h))
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (v, w) in values {
        num += w * v;
        den += w;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::ZeroWeight)
    }
}

/// Number of candidates removed from each tail when trimming `n` values by `alpha`.
pub fn trim_count(n: usize, alpha: f64) -> usize {
    libm::floor(alpha * n as f64 / 2.0 + 1e-9) as usize
}

/// Weighted trimmed mean.
///
/// Pairs are ordered by value, `k = floor(alpha * n / 2)` pairs are dropped from
/// each end and the survivors are averaged with their weights renormalized. With
/// `k = 0` this is the plain weighted mean, summed in input order.
pub fn trimmed_mean(values: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch(values.len(), weights.len()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidConfig("trim fraction must lie in [0, 1)"));
    }
    let n = values.len();
    let k = trim_count(n, alpha);
    if k == 0 {
        return weighted_mean(values.iter().copied().zip(weights.iter().copied()));
    }
    if n <= 2 * k {
        return Err(Error::NoSurvivors);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    weighted_mean(order[k..n - k].iter().map(|&i| (values[i], weights[i])))
}

/// Edge-replicated copy of the image padded by `pad` on every side.
struct Padded {
    data: Vec<f64>,
    stride: usize,
    pad: usize,
}

impl Padded {
    fn new(img: &GrayImage, pad: usize) -> Self {
        let stride = img.width() + 2 * pad;
        let rows = img.height() + 2 * pad;
        let mut data = Vec::with_capacity(stride * rows);
        for py in 0..rows {
            for px in 0..stride {
                data.push(img.get_clamped(px as isize - pad as isize, py as isize - pad as isize));
            }
        }
        Self { data, stride, pad }
    }

    /// Index of the top-left corner of the patch centred on image pixel `(x, y)`.
    #[inline]
    fn patch_origin(&self, x: usize, y: usize) -> usize {
        // Patch offsets run from -pad to +pad, so the origin lands at padded (x, y).
        y * self.stride + x
    }

    #[inline]
    fn distance(&self, a: usize, b: usize, side: usize) -> f64 {
        let mut sum = 0.0;
        for row in 0..side {
            let ra = &self.data[a + row * self.stride..a + row * self.stride + side];
            let rb = &self.data[b + row * self.stride..b + row * self.stride + side];
            for (u, v) in ra.iter().zip(rb) {
                let d = u - v;
                sum += d * d;
            }
        }
        sum
    }

    fn copy_patch(&self, origin: usize, side: usize, out: &mut Vec<f64>) {
        for row in 0..side {
            out.extend_from_slice(&self.data[origin + row * self.stride..origin + row * self.stride + side]);
        }
    }
}

#[derive(Default)]
struct Scratch {
    values: Vec<f64>,
    weights: Vec<f64>,
    origins: Vec<usize>,
    patches: Vec<f64>,
    estimate: Vec<f64>,
    next: Vec<f64>,
}

/// Collects window candidates of pixel `(x, y)` into `scratch`.
fn gather(img: &GrayImage, padded: &Padded, cfg: &NlConfig, x: usize, y: usize, scratch: &mut Scratch) {
    let side = cfg.patch_side();
    let inv_area = 1.0 / (side * side) as f64;
    let s = cfg.search_radius;
    let (w, h) = (img.width(), img.height());
    let p = padded.patch_origin(x, y);
    scratch.values.clear();
    scratch.weights.clear();
    scratch.origins.clear();
    for qy in y.saturating_sub(s)..=(y + s).min(h - 1) {
        for qx in x.saturating_sub(s)..=(x + s).min(w - 1) {
            let q = padded.patch_origin(qx, qy);
            let d = padded.distance(p, q, side) * inv_area;
            scratch.values.push(img.get(qx, qy));
            scratch.weights.push(weight(d, cfg.h));
            scratch.origins.push(q);
        }
    }
    debug_assert_eq!(padded.pad, cfg.patch_radius);
}

fn run_filter(
    img: &GrayImage,
    cfg: &NlConfig,
    reduce: impl Fn(&Padded, &mut Scratch) -> f64 + Sync + Send,
) -> Result<GrayImage> {
    cfg.validate()?;
    let padded = Padded::new(img, cfg.patch_radius);
    let pixels = fill_rows(img.width(), img.height(), Scratch::default, |scratch, y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            gather(img, &padded, cfg, x, y, scratch);
            *out = reduce(&padded, scratch);
        }
    });
    GrayImage::new(img.width(), img.height(), pixels)
}

/// Classical non-local means over the windowed search.
pub fn nlm(img: &GrayImage, cfg: &NlConfig) -> Result<GrayImage> {
    run_filter(img, cfg, |_, s| {
        // The centre pixel always contributes weight 1, so the sum is positive.
        weighted_mean(s.values.iter().copied().zip(s.weights.iter().copied())).unwrap_or(0.0)
    })
}

/// Non-local trimmed mean: NLM with the weighted mean replaced by [`trimmed_mean`]
/// over the candidate centre values.
pub fn nletm(img: &GrayImage, cfg: &NlConfig) -> Result<GrayImage> {
    let alpha = cfg.trim_fraction;
    run_filter(img, cfg, move |_, s| trimmed_mean(&s.values, &s.weights, alpha).unwrap_or(0.0))
}

/// Non-local Euclidean median: the centre value of the weighted geometric median
/// of the candidate patches, found by Weiszfeld iteration from the weighted mean patch.
pub fn nlem(img: &GrayImage, cfg: &NlConfig) -> Result<GrayImage> {
    let side = cfg.patch_side();
    let dim = side * side;
    let center = dim / 2;
    let (tol, max_iter) = (cfg.median_tol, cfg.median_max_iter);
    run_filter(img, cfg, move |padded, s| {
        s.patches.clear();
        for &o in &s.origins {
            padded.copy_patch(o, side, &mut s.patches);
        }
        geometric_median(&s.patches, &s.weights, dim, tol, max_iter, &mut s.estimate, &mut s.next);
        s.estimate[center]
    })
}

/// Weighted geometric median of the rows of `points` (each `dim` long), written to `estimate`.
fn geometric_median(
    points: &[f64],
    weights: &[f64],
    dim: usize,
    tol: f64,
    max_iter: usize,
    estimate: &mut Vec<f64>,
    next: &mut Vec<f64>,
) {
    estimate.clear();
    estimate.resize(dim, 0.0);
    let total: f64 = weights.iter().sum();
    for (pt, &w) in points.chunks_exact(dim).zip(weights) {
        for (e, &v) in estimate.iter_mut().zip(pt) {
            *e += w * v;
        }
    }
    for e in estimate.iter_mut() {
        *e /= total;
    }

    for _ in 0..max_iter {
        next.clear();
        next.resize(dim, 0.0);
        let mut den = 0.0;
        for (pt, &w) in points.chunks_exact(dim).zip(weights) {
            let dist = libm::sqrt(pt.iter().zip(estimate.iter()).map(|(a, b)| (a - b) * (a - b)).sum());
            let c = w / dist.max(WEISZFELD_EPS);
            den += c;
            for (n, &v) in next.iter_mut().zip(pt) {
                *n += c * v;
            }
        }
        let mut change = 0.0;
        let mut norm = 0.0;
        for (n, e) in next.iter_mut().zip(estimate.iter()) {
            *n /= den;
            change += (*n - e) * (*n - e);
            norm += e * e;
        }
        core::mem::swap(estimate, next);
        if libm::sqrt(change) <= tol * libm::sqrt(norm).max(WEISZFELD_EPS) {
            break;
        }
    }
}
