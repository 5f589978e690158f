//! Command-line interface of the `cobb` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cobb_core::phantom::{radiograph_phantom, SpinePhantom};
use cobb_core::{histogram_equalize, measure_cobb, measure_roi, Denoiser, NlConfig, NoiseSpec, PipelineConfig, Rect, RoiRole};

use crate::bench::{psnr_benchmark, write_csv, write_gnuplot, BenchmarkSpec};
use crate::io::{load_image, save_accumulator, save_edges, save_image};
use crate::records::{read_observations, write_mad_tables, Comparison};
use crate::service::{self, MeasureResponse, Overlay, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "cobb", version, about = "Cobb angle measurement on radiographs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a non-local filter over an image.
    Denoise(DenoiseArgs),
    /// Histogram-equalize an image.
    Enhance { input: PathBuf, output: PathBuf },
    /// PSNR benchmark from a JSON spec.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a gnuplot-friendly long table here.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Measure the Cobb angle between two ROIs and print the record as JSON.
    Measure(MeasureArgs),
    /// Intra- and inter-observer MAD tables from an observation CSV.
    Mad {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Another technique's intra-observer MAD, for the reduction column.
        #[arg(long)]
        compare_intra: Option<f64>,
        /// Another technique's inter-observer MAD.
        #[arg(long)]
        compare_inter: Option<f64>,
    },
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic phantom image.
    Phantom(PhantomArgs),
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long, default_value = "nletm")]
    pub filter: Denoiser,
    /// Noise level in 8-bit units; sets h = 10 * sigma / 255.
    #[arg(long, default_value_t = 10.0, conflicts_with = "h")]
    pub sigma_h: f64,
    /// Decay h on the normalized scale.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub patch_radius: usize,
    #[arg(long, default_value_t = 10)]
    pub search_radius: usize,
    #[arg(long, default_value_t = 0.3)]
    pub trim: f64,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Superior ROI as x,y,w,h.
    #[arg(long, value_parser = parse_rect)]
    pub roi_sup: Rect,
    /// Inferior ROI as x,y,w,h.
    #[arg(long, value_parser = parse_rect)]
    pub roi_inf: Rect,
    #[arg(long)]
    pub denoiser: Option<Denoiser>,
    /// Decay h of the ROI denoiser.
    #[arg(long)]
    pub h: Option<f64>,
    /// Full pipeline settings as JSON; other flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub observer: String,
    /// Write each ROI's edge map as PGM into this directory.
    #[arg(long)]
    pub dump_edges: Option<PathBuf>,
    /// Write each ROI's Hough accumulator as PGM into this directory.
    #[arg(long)]
    pub dump_hough: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = service::DEFAULT_LISTEN)]
    pub listen: SocketAddr,
    #[arg(long, default_value = "cobb-data")]
    pub data_dir: PathBuf,
    #[arg(long, default_value_t = service::DEFAULT_MAX_IMAGE_BYTES)]
    pub max_image_bytes: usize,
    /// Directory of static UI files served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Output image (.png or .pgm).
    #[arg(long)]
    pub out: PathBuf,
    /// Superior bar inclination in degrees.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub superior: f64,
    /// Inferior bar inclination in degrees.
    #[arg(long, default_value_t = -15.0, allow_negative_numbers = true)]
    pub inferior: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw a vertebral column of this side length instead of the two-bar phantom.
    #[arg(long)]
    pub column: Option<usize>,
}

pub fn parse_rect(s: &str) -> Result<Rect, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, w, h] = parts.as_slice() else {
        return Err(format!("expected x,y,w,h, got {s:?}"));
    };
    let n = |v: &str| v.parse::<usize>().map_err(|_| format!("{v:?} is not a nonnegative integer"));
    Ok(Rect::new(n(x)?, n(y)?, n(w)?, n(h)?))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Denoise(a) => denoise(a),
        Command::Enhance { input, output } => {
            let img = load_image(&input)?;
            save_image(&histogram_equalize(&img), &output)?;
            Ok(())
        }
        Command::Bench { spec, out, gnuplot } => bench(&spec, &out, gnuplot.as_deref()),
        Command::Measure(a) => measure(a),
        Command::Mad { observations, out, compare_intra, compare_inter } => {
            let obs = read_observations(File::open(&observations).with_context(|| observations.display().to_string())?)?;
            let skipped = write_mad_tables(
                &obs,
                Comparison { intra: compare_intra, inter: compare_inter },
                BufWriter::new(File::create(&out)?),
            )?;
            for s in skipped {
                log::warn!("skipped {s}");
            }
            Ok(())
        }
        Command::Serve(a) => serve(a),
        Command::Phantom(a) => phantom(a),
    }
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let cfg = NlConfig {
        patch_radius: a.patch_radius,
        search_radius: a.search_radius,
        h: a.h.unwrap_or(10.0 * a.sigma_h / 255.0),
        trim_fraction: a.trim,
        ..NlConfig::default()
    };
    let img = load_image(&a.input)?;
    save_image(&a.filter.apply(&img, &cfg)?, &a.output)?;
    Ok(())
}

fn bench(spec_path: &Path, out: &Path, gnuplot: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| spec_path.display().to_string())?;
    let mut spec: BenchmarkSpec = serde_json::from_str(&text).context("benchmark spec")?;
    // Image paths are relative to the spec file.
    if let Some(dir) = spec_path.parent() {
        for p in &mut spec.clean_images {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    let rows = psnr_benchmark(&spec)?;
    for r in &rows {
        for f in &r.failures {
            log::warn!("{} sigma {}: {f}", r.filter, r.sigma);
        }
    }
    write_csv(&rows, BufWriter::new(File::create(out)?))?;
    if let Some(g) = gnuplot {
        let mut w = BufWriter::new(File::create(g)?);
        write_gnuplot(&rows, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn measure(a: MeasureArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).context("pipeline config")?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = a.denoiser {
        cfg.denoiser = d;
    }
    if let Some(h) = a.h {
        cfg.nl.h = h;
    }
    let img = load_image(&a.image)?;
    for (dir, what) in [(&a.dump_edges, "edges"), (&a.dump_hough, "hough")] {
        let Some(dir) = dir else { continue };
        fs::create_dir_all(dir)?;
        for (role, roi) in [(RoiRole::Superior, a.roi_sup), (RoiRole::Inferior, a.roi_inf)] {
            let analysis = measure_roi(&img, roi, &cfg)?;
            let path = dir.join(format!("{role}_{what}.pgm"));
            if what == "edges" {
                save_edges(&analysis.edges, &path)?;
            } else {
                save_accumulator(&analysis.accumulator, &path)?;
            }
        }
    }
    let image_id = a.image.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let measurement = measure_cobb(&img, a.roi_sup, a.roi_inf, &cfg)?.labeled(
        image_id,
        a.observer,
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    );
    let overlay = Overlay {
        superior: measurement.overlay(RoiRole::Superior),
        inferior: measurement.overlay(RoiRole::Inferior),
    };
    println!("{}", serde_json::to_string_pretty(&MeasureResponse { measurement, overlay })?);
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    if a.max_image_bytes == 0 {
        bail!("--max-image-bytes must be positive");
    }
    let config = ServiceConfig { data_dir: a.data_dir, max_image_bytes: a.max_image_bytes, ui_dir: a.ui_dir };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(service::serve(config, a.listen))?;
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    if let Some(side) = a.column {
        let clean = radiograph_phantom(side, side, a.seed);
        save_image(&cobb_core::add_gaussian_noise(&clean, NoiseSpec::new(a.sigma, a.seed)), &a.out)?;
        return Ok(());
    }
    let ph = SpinePhantom::new(a.superior, a.inferior, NoiseSpec::new(a.sigma, a.seed));
    save_image(&ph.render(), &a.out)?;
    let roi = |r: Rect| serde_json::json!({ "x": r.x, "y": r.y, "w": r.w, "h": r.h });
    println!(
        "{}",
        serde_json::json!({
            "roi_superior": roi(ph.roi_superior()),
            "roi_inferior": roi(ph.roi_inferior()),
            "expected_cobb_deg": ph.expected_cobb(),
        })
    );
    Ok(())
}
