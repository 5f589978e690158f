//! Global histogram equalization.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::GrayImage;

pub const LEVELS: usize = 256;

/// Bin of intensity `v` among `bins` levels: `floor(v * (bins - 1) + 0.5)`, clamped.
#[inline]
pub fn bin_of(v: f64, bins: usize) -> usize {
    let b = libm::floor(v * (bins - 1) as f64 + 0.5);
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

/// Pixel counts per bin. `bins` below 2 is raised to 2.
pub fn histogram(img: &GrayImage, bins: usize) -> Vec<u64> {
    let bins = bins.max(2);
    let mut counts = vec![0u64; bins];
    for &v in img.pixels() {
        counts[bin_of(v, bins)] += 1;
    }
    counts
}

/// CDF remap over 256 levels with the lowest occupied level sent to 0.
///
/// `out = (cdf(level) - cdf_min) / (M - cdf_min)`; a single-level image maps to 0.
pub fn histogram_equalize(img: &GrayImage) -> GrayImage {
    let hist = histogram(img, LEVELS);
    let total = img.pixels().len() as u64;
    let mut lut = [0.0f64; LEVELS];
    let mut cdf = 0u64;
    let mut cdf_min = None;
    for (level, &count) in hist.iter().enumerate() {
        cdf += count;
        if count > 0 && cdf_min.is_none() {
            cdf_min = Some(cdf);
        }
        let min = cdf_min.unwrap_or(0);
        lut[level] = if total > min { cdf.saturating_sub(min) as f64 / (total - min) as f64 } else { 0.0 };
    }
    img.map(|v| lut[bin_of(v, LEVELS)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_cases() {
        let zero = GrayImage::constant(4, 4, 0.0).unwrap();
        let h = histogram(&zero, 256);
        assert_eq!(h[0], 16);
        assert_eq!(h.iter().sum::<u64>(), 16);

        let split = GrayImage::from_fn(4, 2, |x, _| if x < 2 { 0.0 } else { 1.0 }).unwrap();
        let h = histogram(&split, 256);
        assert_eq!((h[0], h[255], h.iter().sum::<u64>()), (4, 4, 8));

        let half = GrayImage::new(2, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(histogram(&half, 2), vec![0, 2]);
    }

    #[test]
    fn constant_maps_to_zero() {
        let img = GrayImage::constant(5, 5, 0.6).unwrap();
        assert!(histogram_equalize(&img).pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_level_image() {
        // 25% at level 64, 75% at level 192
        let img = GrayImage::from_fn(4, 4, |x, _| if x == 0 { 64.0 / 255.0 } else { 192.0 / 255.0 }).unwrap();
        let out = histogram_equalize(&img);
        for (i, &v) in out.pixels().iter().enumerate() {
            let expect = if i % 4 == 0 { 0.0 } else { 1.0 };
            assert_eq!(v, expect);
        }
    }

    #[test]
    fn uniform_levels_are_fixed() {
        let img = GrayImage::from_fn(256, 2, |x, _| x as f64 / 255.0).unwrap();
        let out = histogram_equalize(&img);
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }
}
