//! Grayscale PGM/PNG reading and writing, plus debug dumps of edge maps and
//! Hough accumulators.

use std::fs;
use std::path::Path;

use cobb_core::{EdgeMap, GrayImage, HoughAccumulator};
use image::{DynamicImage, ImageFormat};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("unreadable file: {0}")]
    Unreadable(String),
    #[error("unsupported bit depth: {0}")]
    UnsupportedDepth(String),
    #[error("zero-dimension image")]
    ZeroDimension,
    #[error("unsupported output format: {0} (use .png or .pgm)")]
    UnsupportedOutput(String),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

/// Decodes an 8-bit PGM or PNG. Color is reduced to the mean of its RGB channels;
/// alpha is ignored.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let format = image::guess_format(bytes).map_err(|e| ImageError::Unreadable(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(ImageError::Unreadable(format!("{format:?} is not PGM or PNG")));
    }
    let decoded =
        image::load_from_memory_with_format(bytes, format).map_err(|e| ImageError::Unreadable(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(ImageError::ZeroDimension);
    }
    let gray: Vec<u8> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageRgb8(img) => img.pixels().map(|p| mean3(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(img) => img.pixels().map(|p| mean3(p.0[0], p.0[1], p.0[2])).collect(),
        other => return Err(ImageError::UnsupportedDepth(format!("{:?}", other.color()))),
    };
    GrayImage::from_u8(w, h, &gray).map_err(|_| ImageError::ZeroDimension)
}

fn mean3(r: u8, g: u8, b: u8) -> u8 {
    ((r as u32 + g as u32 + b as u32 + 1) / 3) as u8
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ImageError::Unreadable(format!("{}: {e}", path.display())))?;
    decode_image(&bytes)
}

fn output_format(path: &Path) -> Result<ImageFormat, ImageError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" => Ok(ImageFormat::Pnm),
        _ => Err(ImageError::UnsupportedOutput(path.display().to_string())),
    }
}

fn write_gray(path: &Path, width: usize, height: usize, bytes: Vec<u8>) -> Result<(), ImageError> {
    let format = output_format(path)?;
    let buf = image::GrayImage::from_raw(width as u32, height as u32, bytes).expect("buffer matches dimensions");
    buf.save_with_format(path, format)
        .map_err(|e| ImageError::Write { path: path.display().to_string(), message: e.to_string() })
}

/// Writes an 8-bit PNG or binary PGM, chosen by extension.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_gray(path.as_ref(), img.width(), img.height(), img.to_u8())
}

/// PNG bytes of an image.
pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .expect("buffer matches dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

/// Edge pixels as 255 on 0.
pub fn save_edges(edges: &EdgeMap, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_gray(path.as_ref(), edges.width(), edges.height(), edges.to_u8())
}

/// Heat map with one row per theta bin and one column per rho bin, scaled so
/// the peak is 255.
pub fn save_accumulator(acc: &HoughAccumulator, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let max = acc.max_votes().max(1) as f64;
    let bytes = acc.votes().iter().map(|&v| (v as f64 / max * 255.0).round() as u8).collect();
    write_gray(path.as_ref(), acc.rho_bins(), acc.theta_bins(), bytes)
}
