use core::fmt;

use crate::cobb::RoiRole;
use crate::image::Rect;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Why a rectangle cannot be used as a region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoiProblem {
    OutOfBounds,
    TooSmall,
}

impl fmt::Display for RoiProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoiProblem::OutOfBounds => f.write_str("out of bounds"),
            RoiProblem::TooSmall => f.write_str("below minimum size"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer holds {len} values, expected {width}x{height}")]
    BufferSize { width: usize, height: usize, len: usize },
    #[error("pixel values must be finite")]
    NonFinite,
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("roi {rect} {problem}")]
    Roi { rect: Rect, problem: RoiProblem },
    #[error("invalid {role} roi {rect}: {problem}")]
    InvalidRoi { role: RoiRole, rect: Rect, problem: RoiProblem },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} values, {1} weights")]
    LengthMismatch(usize, usize),
    #[error("no samples survive trimming")]
    NoSurvivors,
    #[error("surviving weights sum to zero")]
    ZeroWeight,
    #[error("no line found")]
    NoLine,
    #[error("no endplate found ({0})")]
    NoEndplate(RoiRole),
}
