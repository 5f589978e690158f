//! Procedural radiograph phantoms with known geometry.
//!
//! [`SpinePhantom`] places two tilted bright bars (vertebra bodies) on a dark,
//! smoothly shaded background, so the Cobb angle between their long edges is
//! known exactly. [`radiograph_phantom`] draws a short vertebral column for
//! denoising benchmarks.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{add_gaussian_noise, GrayImage, NoiseSpec, Rect};

const SUPERSAMPLE: usize = 4;

/// A rectangle of given length and thickness rotated by `angle_deg`
/// (positive descends left to right), with optional rounded corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub thickness: f64,
    pub angle_deg: f64,
    pub corner_radius: f64,
    pub intensity: f64,
}

impl Bar {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = libm::sincos(self.angle_deg.to_radians());
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s).abs();
        let v = (-dx * s + dy * c).abs();
        let (hu, hv) = (self.length / 2.0, self.thickness / 2.0);
        if u > hu || v > hv {
            return false;
        }
        let r = self.corner_radius.min(hu).min(hv);
        let (ou, ov) = (u - (hu - r), v - (hv - r));
        !(ou > 0.0 && ov > 0.0 && ou * ou + ov * ov > r * r)
    }

    /// Axis-aligned bounding box of the rotated bar.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (s, c) = libm::sincos(self.angle_deg.to_radians());
        let hw = (self.length * c.abs() + self.thickness * s.abs()) / 2.0;
        let hh = (self.length * s.abs() + self.thickness * c.abs()) / 2.0;
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    /// Fraction of the pixel centred at `(x, y)` that the bar covers.
    fn coverage(&self, x: usize, y: usize) -> f64 {
        let (x0, y0, x1, y1) = self.bounds();
        let (fx, fy) = (x as f64, y as f64);
        if fx + 1.0 < x0 || fx - 1.0 > x1 || fy + 1.0 < y0 || fy - 1.0 > y1 {
            return 0.0;
        }
        let step = 1.0 / SUPERSAMPLE as f64;
        let mut hits = 0;
        for j in 0..SUPERSAMPLE {
            for i in 0..SUPERSAMPLE {
                let sx = fx - 0.5 + (i as f64 + 0.5) * step;
                let sy = fy - 0.5 + (j as f64 + 0.5) * step;
                if self.contains(sx, sy) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
    }
}

/// Renders bars over a background `base + gradient * (x + y) / (w + h)`.
pub fn render_bars(width: usize, height: usize, base: f64, gradient: f64, bars: &[Bar]) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        let mut v = base + gradient * (x + y) as f64 / (width + height) as f64;
        for bar in bars {
            let a = bar.coverage(x, y);
            if a > 0.0 {
                v = v * (1.0 - a) + bar.intensity * a;
            }
        }
        v.clamp(0.0, 1.0)
    })
    .expect("phantom dimensions are nonzero")
}

/// Two-vertebra phantom with known endplate inclinations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinePhantom {
    pub width: usize,
    pub height: usize,
    pub superior: Bar,
    pub inferior: Bar,
    pub noise: NoiseSpec,
    /// Background is `background + gradient * (x + y) / (w + h)`.
    pub background: f64,
    pub gradient: f64,
    /// Padding added around each bar's bounding box when forming its ROI.
    pub roi_margin: f64,
}

impl SpinePhantom {
    /// 300x200 image with 60x24 bars centred at (150, 55) and (150, 145).
    pub fn new(angle_superior: f64, angle_inferior: f64, noise: NoiseSpec) -> Self {
        let bar = |cy, angle_deg| Bar {
            cx: 150.0,
            cy,
            length: 60.0,
            thickness: 24.0,
            angle_deg,
            corner_radius: 0.0,
            intensity: 0.8,
        };
        Self {
            width: 300,
            height: 200,
            superior: bar(55.0, angle_superior),
            inferior: bar(145.0, angle_inferior),
            noise,
            background: 0.15,
            gradient: 0.15,
            roi_margin: 8.0,
        }
    }

    pub fn expected_cobb(&self) -> f64 {
        (self.superior.angle_deg - self.inferior.angle_deg).abs()
    }

    pub fn render_clean(&self) -> GrayImage {
        render_bars(self.width, self.height, self.background, self.gradient, &[self.superior, self.inferior])
    }

    pub fn render(&self) -> GrayImage {
        add_gaussian_noise(&self.render_clean(), self.noise)
    }

    fn roi_for(&self, bar: &Bar) -> Rect {
        let (x0, y0, x1, y1) = bar.bounds();
        let m = self.roi_margin;
        let left = libm::floor(x0 - m).max(0.0) as usize;
        let top = libm::floor(y0 - m).max(0.0) as usize;
        let right = (libm::ceil(x1 + m) as usize).min(self.width);
        let bottom = (libm::ceil(y1 + m) as usize).min(self.height);
        Rect::new(left, top, right - left, bottom - top)
    }

    pub fn roi_superior(&self) -> Rect {
        self.roi_for(&self.superior)
    }

    pub fn roi_inferior(&self) -> Rect {
        self.roi_for(&self.inferior)
    }
}

/// A small deterministic generator for phantom parameters.
struct Params(ChaCha8Rng);

impl Params {
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

/// A vertical run of rounded vertebra bodies separated by darker disc spaces
/// over a smoothly shaded soft-tissue background.
pub fn radiograph_phantom(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut p = Params(ChaCha8Rng::seed_from_u64(seed));
    let scale = width.min(height) as f64;
    let count = 4;
    let pitch = height as f64 / count as f64;
    let base = p.uniform(0.30, 0.36);
    let gradient = p.uniform(0.05, 0.12);
    let mut bars = Vec::with_capacity(count);
    let mut cx = width as f64 / 2.0 + p.uniform(-0.05, 0.05) * scale;
    for i in 0..count {
        cx += p.uniform(-0.04, 0.04) * scale;
        bars.push(Bar {
            cx,
            cy: pitch * (i as f64 + 0.5),
            length: scale * p.uniform(0.42, 0.52),
            thickness: pitch * p.uniform(0.62, 0.72),
            angle_deg: p.uniform(-12.0, 12.0),
            corner_radius: pitch * 0.12,
            intensity: base + p.uniform(0.18, 0.22),
        });
    }
    render_bars(width, height, base, gradient, &bars)
}
