//! File formats, benchmark harness, CLI plumbing and HTTP service around
//! [`cobb_core`].
//!
//! - [`io`]: 8-bit PGM and PNG images, edge and Hough dumps.
//! - [`bench`]: PSNR benchmark over clean images and noise levels.
//! - [`records`]: observation CSV and MAD tables.
//! - [`service`]: the measurement HTTP service and its directory store.

pub mod bench;
pub mod cli;
pub mod io;
pub mod records;
pub mod service;

pub use cobb_core as core;
