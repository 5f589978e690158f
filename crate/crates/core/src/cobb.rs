//! End-to-end Cobb measurement on two user-selected vertebra ROIs.
//!
//! Each ROI goes through crop, non-local denoising, histogram equalization,
//! Otsu-thresholded Canny and Hough endplate detection. The two endplate
//! inclinations are then combined into the Cobb angle.

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::denoise::{Denoiser, NlConfig};
use crate::edges::{canny_otsu, CannyConfig, EdgeMap};
use crate::enhance::histogram_equalize;
use crate::error::{Error, Result};
use crate::image::{crop_roi, GrayImage, Rect};
use crate::lines::{detect_endplate, endplate_in, hough_accumulate, line_slope_deg, HoughAccumulator, HoughConfig, LineRT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoiRole {
    Superior,
    Inferior,
}

impl RoiRole {
    /// JSON field name of the ROI with this role.
    pub fn field(self) -> &'static str {
        match self {
            RoiRole::Superior => "roi_superior",
            RoiRole::Inferior => "roi_inferior",
        }
    }
}

impl fmt::Display for RoiRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoiRole::Superior => "superior",
            RoiRole::Inferior => "inferior",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub nl: NlConfig,
    pub canny: CannyConfig,
    pub hough: HoughConfig,
    pub denoiser: Denoiser,
}

/// Decay used for measurement. Histogram equalization stretches any residual
/// low-contrast structure, so the ROI is only lightly smoothed.
pub const MEASURE_H: f64 = 0.03;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nl: NlConfig { h: MEASURE_H, ..NlConfig::default() },
            canny: CannyConfig::default(),
            hough: HoughConfig::default(),
            denoiser: Denoiser::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.nl.validate()?;
        self.canny.validate()?;
        self.hough.validate()
    }
}

/// Cobb angle from two signed endplate inclinations: `|a1 - a2|`.
///
/// For endplates tilted to opposite sides this is `|a1| + |a2|`.
pub fn combine_angles(a1: f64, a2: f64) -> f64 {
    (a1 - a2).abs()
}

fn round2<S: Serializer>(v: &f64, s: S) -> core::result::Result<S::Ok, S::Error> {
    s.serialize_f64(libm::round(v * 100.0) / 100.0)
}

/// One Cobb measurement. Lines are in ROI-local coordinates; add the ROI
/// origin to place them on the full image (see [`Measurement::overlay`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub image_id: String,
    pub observer_id: String,
    pub timestamp: String,
    pub roi_superior: Rect,
    pub roi_inferior: Rect,
    pub line_superior: LineRT,
    pub line_inferior: LineRT,
    #[serde(serialize_with = "round2")]
    pub angle_superior: f64,
    #[serde(serialize_with = "round2")]
    pub angle_inferior: f64,
    #[serde(serialize_with = "round2")]
    pub cobb_deg: f64,
}

/// Line segment in full-image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Measurement {
    pub fn labeled(mut self, image_id: impl Into<String>, observer_id: impl Into<String>, timestamp: impl Into<String>) -> Self {
        self.image_id = image_id.into();
        self.observer_id = observer_id.into();
        self.timestamp = timestamp.into();
        self
    }

    pub fn roi(&self, role: RoiRole) -> Rect {
        match role {
            RoiRole::Superior => self.roi_superior,
            RoiRole::Inferior => self.roi_inferior,
        }
    }

    pub fn line(&self, role: RoiRole) -> LineRT {
        match role {
            RoiRole::Superior => self.line_superior,
            RoiRole::Inferior => self.line_inferior,
        }
    }

    /// The detected line of `role` clipped to its ROI, in full-image coordinates.
    pub fn overlay(&self, role: RoiRole) -> Option<Segment> {
        let roi = self.roi(role);
        let [a, b] = self.line(role).clip_to(roi.w, roi.h)?;
        let (ox, oy) = (roi.x as f64, roi.y as f64);
        Some(Segment { x1: a.0 + ox, y1: a.1 + oy, x2: b.0 + ox, y2: b.1 + oy })
    }
}

/// Intermediate products of one ROI's pass through the pipeline.
#[derive(Debug, Clone)]
pub struct RoiAnalysis {
    pub roi: Rect,
    pub denoised: GrayImage,
    pub enhanced: GrayImage,
    pub edges: EdgeMap,
    pub accumulator: HoughAccumulator,
    /// `None` when no peak inside the theta band reaches `min_votes`.
    pub line: Option<LineRT>,
}

impl RoiAnalysis {
    pub fn angle(&self) -> Option<f64> {
        self.line.as_ref().map(line_slope_deg)
    }
}

/// Runs crop, denoise, equalize, Canny and Hough on one ROI.
pub fn measure_roi(img: &GrayImage, roi: Rect, cfg: &PipelineConfig) -> Result<RoiAnalysis> {
    cfg.validate()?;
    let cropped = crop_roi(img, roi)?;
    let denoised = cfg.denoiser.apply(&cropped, &cfg.nl)?;
    let enhanced = histogram_equalize(&denoised);
    let edges = canny_otsu(&enhanced, &cfg.canny)?;
    let accumulator = hough_accumulate(&edges, &cfg.hough)?;
    let line = match endplate_in(&edges, &accumulator) {
        Ok(l) => Some(l),
        Err(Error::NoLine) => None,
        Err(e) => return Err(e),
    };
    Ok(RoiAnalysis { roi, denoised, enhanced, edges, accumulator, line })
}

fn endplate(img: &GrayImage, roi: Rect, role: RoiRole, cfg: &PipelineConfig) -> Result<LineRT> {
    let cropped = crop_roi(img, roi)?;
    let denoised = cfg.denoiser.apply(&cropped, &cfg.nl)?;
    let edges = canny_otsu(&histogram_equalize(&denoised), &cfg.canny)?;
    detect_endplate(&edges, &cfg.hough).map_err(|e| match e {
        Error::NoLine => Error::NoEndplate(role),
        other => other,
    })
}

/// Measures the Cobb angle between the endplates found in the two ROIs.
///
/// The returned record has empty `image_id`, `observer_id` and `timestamp`;
/// callers fill them with [`Measurement::labeled`].
pub fn measure_cobb(img: &GrayImage, roi_sup: Rect, roi_inf: Rect, cfg: &PipelineConfig) -> Result<Measurement> {
    for (role, roi) in [(RoiRole::Superior, roi_sup), (RoiRole::Inferior, roi_inf)] {
        roi.check_roi(img.width(), img.height()).map_err(|e| match e {
            Error::Roi { rect, problem } => Error::InvalidRoi { role, rect, problem },
            other => other,
        })?;
    }
    cfg.validate()?;

    #[cfg(feature = "parallel")]
    let (sup, inf) = rayon::join(
        || endplate(img, roi_sup, RoiRole::Superior, cfg),
        || endplate(img, roi_inf, RoiRole::Inferior, cfg),
    );
    #[cfg(not(feature = "parallel"))]
    let (sup, inf) = (
        endplate(img, roi_sup, RoiRole::Superior, cfg),
        endplate(img, roi_inf, RoiRole::Inferior, cfg),
    );
    let (line_superior, line_inferior) = (sup?, inf?);

    let angle_superior = line_slope_deg(&line_superior);
    let angle_inferior = line_slope_deg(&line_inferior);
    Ok(Measurement {
        image_id: String::new(),
        observer_id: String::new(),
        timestamp: String::new(),
        roi_superior: roi_sup,
        roi_inferior: roi_inf,
        line_superior,
        line_inferior,
        angle_superior,
        angle_inferior,
        cobb_deg: combine_angles(angle_superior, angle_inferior),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::RoiProblem;

    #[test]
    fn combine_cases() {
        assert_eq!(combine_angles(10.0, -15.0), 25.0);
        assert_eq!(combine_angles(7.0, 7.0), 0.0);
        assert_eq!(combine_angles(0.0, -30.0), 30.0);
        assert_eq!(combine_angles(-15.0, 10.0), combine_angles(10.0, -15.0));
    }

    #[test]
    fn invalid_roi_names_role() {
        let img = GrayImage::constant(64, 64, 0.5).unwrap();
        let err = measure_cobb(&img, Rect::new(0, 0, 20, 20), Rect::new(50, 50, 20, 20), &PipelineConfig::default())
            .unwrap_err();
        assert_eq!(
            err,
            Error::InvalidRoi { role: RoiRole::Inferior, rect: Rect::new(50, 50, 20, 20), problem: RoiProblem::OutOfBounds }
        );
        let err = measure_cobb(&img, Rect::new(0, 0, 10, 20), Rect::new(0, 30, 20, 20), &PipelineConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidRoi { role: RoiRole::Superior, problem: RoiProblem::TooSmall, .. }));
    }

    #[test]
    fn flat_roi_has_no_endplate() {
        let img = GrayImage::from_fn(64, 64, |_, y| if y < 32 && (8..24).contains(&y) { 0.9 } else { 0.2 }).unwrap();
        let err = measure_cobb(&img, Rect::new(4, 0, 40, 32), Rect::new(4, 34, 40, 28), &PipelineConfig::default())
            .unwrap_err();
        assert_eq!(err, Error::NoEndplate(RoiRole::Inferior));
        assert_eq!(alloc::format!("{err}"), "no endplate found (inferior)");
    }
}
