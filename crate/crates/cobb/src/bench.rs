//! PSNR benchmark of the non-local filters over a bank of clean images and
//! noise levels.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use cobb_core::{add_gaussian_noise, psnr, Denoiser, GrayImage, NlConfig, NoiseSpec};
use serde::{Deserialize, Serialize};

use crate::io::load_image;

/// A benchmarked filter. `Identity` scores the noisy input itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Filter {
    Identity,
    Nl(Denoiser),
}

impl Filter {
    pub const ALL: [Filter; 4] =
        [Filter::Identity, Filter::Nl(Denoiser::Nlm), Filter::Nl(Denoiser::Nlem), Filter::Nl(Denoiser::Nletm)];

    pub fn apply(self, noisy: &GrayImage, cfg: &NlConfig) -> cobb_core::Result<GrayImage> {
        match self {
            Filter::Identity => Ok(noisy.clone()),
            Filter::Nl(d) => d.apply(noisy, cfg),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::Identity => f.write_str("identity"),
            Filter::Nl(d) => d.fmt(f),
        }
    }
}

impl FromStr for Filter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("identity") {
            return Ok(Filter::Identity);
        }
        s.parse().map(Filter::Nl).map_err(|_| format!("unknown filter {s:?}"))
    }
}

impl Serialize for Filter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Filter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Benchmark description, read from JSON.
///
/// `seeds` holds one noise seed per (image, sigma) cell in image-major order.
/// Left empty, cell `i` uses seed `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub clean_images: Vec<PathBuf>,
    pub sigmas: Vec<f64>,
    pub filters: Vec<Filter>,
    #[serde(default)]
    pub nl: NlConfig,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpecError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("expected {expected} seeds (one per image and sigma), got {got}")]
    Seeds { expected: usize, got: usize },
    #[error("noise sigma must be finite and nonnegative")]
    Sigma,
    #[error("invalid filter settings: {0}")]
    Config(cobb_core::Error),
}

impl BenchmarkSpec {
    pub fn validate(&self, images: usize) -> Result<(), SpecError> {
        if images == 0 {
            return Err(SpecError::Empty("clean_images"));
        }
        if self.sigmas.is_empty() {
            return Err(SpecError::Empty("sigmas"));
        }
        if self.filters.is_empty() {
            return Err(SpecError::Empty("filters"));
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(SpecError::Sigma);
        }
        let expected = images * self.sigmas.len();
        if !self.seeds.is_empty() && self.seeds.len() != expected {
            return Err(SpecError::Seeds { expected, got: self.seeds.len() });
        }
        self.nl_for(self.sigmas[0]).validate().map_err(SpecError::Config)
    }

    fn seed(&self, image: usize, sigma: usize) -> u64 {
        let cell = image * self.sigmas.len() + sigma;
        self.seeds.get(cell).copied().unwrap_or(cell as u64)
    }

    /// Filter settings for one noise level: the template with `h = 10 sigma / 255`.
    /// Noise-free cells use the `sigma = 1` decay so the filters still run.
    pub fn nl_for(&self, sigma: f64) -> NlConfig {
        NlConfig { h: 10.0 * sigma.max(1.0) / 255.0, ..self.nl }
    }
}

/// Mean PSNR of one (filter, sigma) cell over the images that ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub filter: Filter,
    pub sigma: f64,
    /// `None` when every image of the cell failed.
    pub mean_psnr_db: Option<f64>,
    pub images: usize,
    pub failures: Vec<String>,
}

/// Runs the benchmark over in-memory clean images. Entries that are `Err`
/// (images that failed to load) are recorded as failures in every cell.
pub fn run_images(
    spec: &BenchmarkSpec,
    images: &[(String, Result<GrayImage, String>)],
) -> Result<Vec<BenchRow>, SpecError> {
    spec.validate(images.len())?;
    let mut filters = spec.filters.clone();
    filters.sort();
    filters.dedup();
    let mut rows: Vec<BenchRow> = filters
        .iter()
        .flat_map(|&filter| {
            spec.sigmas.iter().map(move |&sigma| BenchRow { filter, sigma, mean_psnr_db: None, images: 0, failures: vec![] })
        })
        .collect();
    let mut sums = vec![0.0; rows.len()];
    let row_of = |f: usize, s: usize| f * spec.sigmas.len() + s;

    for (i, (name, clean)) in images.iter().enumerate() {
        for (j, &sigma) in spec.sigmas.iter().enumerate() {
            let clean = match clean {
                Ok(c) => c,
                Err(e) => {
                    for f in 0..filters.len() {
                        rows[row_of(f, j)].failures.push(format!("{name}: {e}"));
                    }
                    continue;
                }
            };
            let noisy = add_gaussian_noise(clean, NoiseSpec::new(sigma, spec.seed(i, j)));
            let cfg = spec.nl_for(sigma);
            for (f, filter) in filters.iter().enumerate() {
                let k = row_of(f, j);
                match filter.apply(&noisy, &cfg).and_then(|out| psnr(clean, &out)) {
                    Ok(p) => {
                        sums[k] += p;
                        rows[k].images += 1;
                    }
                    Err(e) => rows[k].failures.push(format!("{name}: {e}")),
                }
            }
        }
    }
    for (row, sum) in rows.iter_mut().zip(sums) {
        if row.images > 0 {
            row.mean_psnr_db = Some(sum / row.images as f64);
        }
    }
    rows.sort_by(|a, b| a.filter.cmp(&b.filter).then(a.sigma.total_cmp(&b.sigma)));
    Ok(rows)
}

/// Loads `spec.clean_images` and runs the benchmark. Unloadable images are
/// reported per cell; the rest of the run continues.
pub fn psnr_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchRow>, SpecError> {
    let images: Vec<(String, Result<GrayImage, String>)> = spec
        .clean_images
        .iter()
        .map(|p| (p.display().to_string(), load_image(p).map_err(|e| e.to_string())))
        .collect();
    run_images(spec, &images)
}

fn format_db(v: Option<f64>) -> String {
    match v {
        Some(p) if p.is_infinite() => "inf".into(),
        Some(p) => format!("{p:.2}"),
        None => "failed".into(),
    }
}

/// `filter,sigma,mean_psnr_db`, two decimals, `inf` for lossless cells.
pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["filter", "sigma", "mean_psnr_db"])?;
    for r in rows {
        w.write_record([r.filter.to_string(), r.sigma.to_string(), format_db(r.mean_psnr_db)])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format for gnuplot: one indexed block per filter, `sigma psnr` lines.
pub fn write_gnuplot<W: Write>(rows: &[BenchRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# sigma mean_psnr_db")?;
    let mut current = None;
    for r in rows {
        if current != Some(r.filter) {
            if current.is_some() {
                writeln!(out, "\n")?;
            }
            writeln!(out, "# {}", r.filter)?;
            current = Some(r.filter);
        }
        writeln!(out, "{} {}", r.sigma, format_db(r.mean_psnr_db))?;
    }
    Ok(())
}
