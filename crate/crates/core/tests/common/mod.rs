#![allow(dead_code)]

use cobb_core::{EdgeMap, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
}

/// Straight double loop over the clipped search window with edge-replicated patches.
pub fn nlm_oracle(img: &GrayImage, r: usize, s: usize, h: f64) -> Vec<f64> {
    let (w, ht) = (img.width() as isize, img.height() as isize);
    let (r, s) = (r as isize, s as isize);
    let px = |x: isize, y: isize| img.get(x.clamp(0, w - 1) as usize, y.clamp(0, ht - 1) as usize);
    let side = (2 * r + 1) as f64;
    let mut out = Vec::with_capacity(img.pixels().len());
    for py in 0..ht {
        for pxx in 0..w {
            let (mut num, mut den) = (0.0, 0.0);
            for qy in (py - s).max(0)..=(py + s).min(ht - 1) {
                for qx in (pxx - s).max(0)..=(pxx + s).min(w - 1) {
                    let mut d = 0.0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let diff = px(pxx + dx, py + dy) - px(qx + dx, qy + dy);
                            d += diff * diff;
                        }
                    }
                    d /= side * side;
                    let wgt = (-d / (h * h)).exp();
                    num += wgt * img.get(qx as usize, qy as usize);
                    den += wgt;
                }
            }
            out.push(num / den);
        }
    }
    out
}

/// Best split by direct weights-and-means evaluation at every candidate bin.
pub fn otsu_oracle(hist: &[u64]) -> usize {
    let total: f64 = hist.iter().map(|&c| c as f64).sum();
    let lo = hist.iter().position(|&c| c > 0).unwrap();
    let hi = hist.iter().rposition(|&c| c > 0).unwrap();
    let mut best = (lo, -1.0);
    for b in lo..=hi {
        let (mut c0, mut m0, mut c1, mut m1) = (0.0, 0.0, 0.0, 0.0);
        for (i, &c) in hist.iter().enumerate() {
            let (c, v) = (c as f64, i as f64 * c as f64);
            if i <= b {
                c0 += c;
                m0 += v;
            } else {
                c1 += c;
                m1 += v;
            }
        }
        let var = if c0 == 0.0 || c1 == 0.0 {
            0.0
        } else {
            let d = m0 / c0 - m1 / c1;
            (c0 / total) * (c1 / total) * d * d
        };
        // Relative slack so float noise in the oracle cannot break exact ties the other way.
        if var > best.1 * (1.0 + 1e-12) {
            best = (b, var);
        }
    }
    best.0
}

pub fn random_histogram(rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut hist = vec![0u64; 256];
    match rng.random_range(0..3) {
        0 => {
            for c in hist.iter_mut() {
                *c = rng.random_range(0..50);
            }
        }
        1 => {
            for _ in 0..rng.random_range(1..6) {
                let centre = rng.random_range(0..256) as f64;
                let spread = rng.random_range(2.0..30.0);
                let mass = rng.random_range(50..2000);
                for (i, c) in hist.iter_mut().enumerate() {
                    let z = (i as f64 - centre) / spread;
                    *c += (mass as f64 * (-0.5 * z * z).exp()) as u64;
                }
            }
        }
        _ => {
            for _ in 0..rng.random_range(1..8) {
                hist[rng.random_range(0..256)] += rng.random_range(1..500);
            }
        }
    }
    if hist.iter().all(|&c| c == 0) {
        hist[rng.random_range(0..256)] = 1;
    }
    hist
}

/// Rasterizes a segment of `length` px centred on pixel `(cx, cy)` and
/// inclined `slope_deg` from horizontal (positive descends to the right),
/// stepping one pixel at a time along its major axis, symmetrically about the
/// centre so the digital segment keeps the requested slope.
pub fn segment(w: usize, h: usize, cx: usize, cy: usize, length: f64, slope_deg: f64) -> EdgeMap {
    let (s, c) = slope_deg.to_radians().sin_cos();
    let half = length / 2.0;
    let n = (half * c.abs().max(s.abs())).ceil() as i64;
    let pts = (-n..=n).filter_map(|i| {
        let t = half * i as f64 / n as f64;
        let (x, y) = ((cx as f64 + t * c).round(), (cy as f64 + t * s).round());
        (x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h).then_some((x as usize, y as usize))
    });
    EdgeMap::from_points(w, h, pts)
}

/// Ground-truth Cobb totals, five per severity group, and their split into
/// two endplate tilts of alternating orientation.
pub fn phantom_angles() -> Vec<(f64, f64)> {
    let totals = [
        3.0, 7.0, 1.0, 5.0, 9.0, 12.0, 16.0, 20.0, 23.0, 18.0, 27.0, 31.0, 35.0, 38.0, 29.0, 42.0, 47.0, 52.0, 58.0, 45.0,
    ];
    totals
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let split = 0.3 + 0.4 * ((i * 7) % 10) as f64 / 10.0;
            let (sup, inf) = (t * split, -(t * (1.0 - split)));
            if i % 2 == 0 {
                (sup, inf)
            } else {
                (-sup, -inf)
            }
        })
        .collect()
}
