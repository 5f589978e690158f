//! Cobb angle measurement on radiographs.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numeric stage of
//! the measurement: image values and PSNR, the non-local denoisers (mean,
//! Euclidean median, trimmed mean), histogram equalization, Otsu-driven Canny
//! edges, Hough endplate detection, the Cobb combination itself and the
//! observer-variability statistics. File formats, the CLI and the HTTP
//! service live in the `cobb` crate.
//!
//! Enable the `parallel` feature to spread the per-row filter kernels over a
//! rayon pool. Results are bit-identical either way.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

mod error;
mod rows;

pub mod cobb;
pub mod denoise;
pub mod edges;
pub mod enhance;
pub mod image;
pub mod lines;
pub mod phantom;
pub mod reliability;

pub use cobb::{combine_angles, measure_cobb, measure_roi, Measurement, PipelineConfig, RoiAnalysis, RoiRole, Segment};
pub use denoise::{nlem, nletm, nlm, patch_distance, trimmed_mean, weight, Denoiser, NlConfig, Patch};
pub use edges::{canny, canny_otsu, otsu_threshold, CannyConfig, EdgeMap};
pub use enhance::{histogram, histogram_equalize};
pub use error::{Error, Result, RoiProblem};
pub use image::{add_gaussian_noise, crop_roi, psnr, GrayImage, NoiseSpec, Rect};
pub use lines::{detect_endplate, hough_accumulate, hough_peak, line_slope_deg, refine_line, HoughAccumulator, HoughConfig, LineRT};
pub use reliability::{
    inter_observer_table, intra_observer_table, mad, percent_reduction, summarize, Group, MadCell, MadTable, Method,
    Observation, ObservationSet, Summary,
};
