//! Hough transform over edge maps and endplate slope extraction.
//!
//! Lines are `x cos(theta) + y sin(theta) = rho` with `theta` the normal angle
//! in degrees and image `y` growing downward. A horizontal line has
//! `theta = 90`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::edges::EdgeMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoughConfig {
    /// Pixels per rho bin.
    pub rho_resolution: f64,
    /// Degrees per theta bin.
    pub theta_resolution: f64,
    /// Admissible normal-angle band in degrees, both ends included.
    pub theta_min: f64,
    pub theta_max: f64,
    /// Fewest supporting edge pixels for a peak to count as an endplate.
    pub min_votes: u32,
    /// Re-fit the peak line to the edge pixels near it and snap the fit back
    /// onto the bin grid (see [`refine_line`]).
    pub refine: bool,
}

impl Default for HoughConfig {
    /// 1 px by 1 degree bins over normals within 45 degrees of vertical, i.e.
    /// lines within 45 degrees of horizontal.
    fn default() -> Self {
        Self { rho_resolution: 1.0, theta_resolution: 1.0, theta_min: 45.0, theta_max: 135.0, min_votes: 10, refine: true }
    }
}

impl HoughConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_resolution.is_finite() && self.rho_resolution > 0.0) {
            return Err(Error::InvalidConfig("rho_resolution must be positive"));
        }
        if !(self.theta_resolution.is_finite() && self.theta_resolution > 0.0) {
            return Err(Error::InvalidConfig("theta_resolution must be positive"));
        }
        if self.theta_min.partial_cmp(&self.theta_max) != Some(core::cmp::Ordering::Less) {
            return Err(Error::InvalidConfig("theta_min must be below theta_max"));
        }
        Ok(())
    }

    pub fn theta_bins(&self) -> usize {
        libm::floor((self.theta_max - self.theta_min) / self.theta_resolution + 1e-9) as usize + 1
    }

    pub fn theta_at(&self, index: usize) -> f64 {
        self.theta_min + index as f64 * self.theta_resolution
    }
}

/// A detected line and the number of edge pixels that voted for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineRT {
    pub rho: f64,
    pub theta: f64,
    pub votes: u32,
}

impl LineRT {
    /// The two points where the line leaves the box `[0, w-1] x [0, h-1]`, if it crosses it.
    pub fn clip_to(&self, width: usize, height: usize) -> Option<[(f64, f64); 2]> {
        let (c, s) = (libm::cos(self.theta.to_radians()), libm::sin(self.theta.to_radians()));
        let (xmax, ymax) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
        let eps = 1e-9;
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(4);
        if s.abs() > eps {
            for x in [0.0, xmax] {
                let y = (self.rho - x * c) / s;
                if (-eps..=ymax + eps).contains(&y) {
                    pts.push((x, y.clamp(0.0, ymax)));
                }
            }
        }
        if c.abs() > eps {
            for y in [0.0, ymax] {
                let x = (self.rho - y * s) / c;
                if (-eps..=xmax + eps).contains(&x) {
                    pts.push((x.clamp(0.0, xmax), y));
                }
            }
        }
        let mut best: Option<([(f64, f64); 2], f64)> = None;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                let d = (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1);
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some(([*a, *b], d));
                }
            }
        }
        best.map(|(p, _)| p)
    }
}

/// Vote grid over theta bins (rows) by rho bins (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct HoughAccumulator {
    cfg: HoughConfig,
    n_theta: usize,
    n_rho: usize,
    rho_half: usize,
    votes: Vec<u32>,
}

impl HoughAccumulator {
    pub fn config(&self) -> &HoughConfig {
        &self.cfg
    }

    pub fn theta_bins(&self) -> usize {
        self.n_theta
    }

    pub fn rho_bins(&self) -> usize {
        self.n_rho
    }

    pub fn votes(&self) -> &[u32] {
        &self.votes
    }

    pub fn get(&self, theta_index: usize, rho_index: usize) -> u32 {
        self.votes[theta_index * self.n_rho + rho_index]
    }

    pub fn rho_at(&self, rho_index: usize) -> f64 {
        (rho_index as f64 - self.rho_half as f64) * self.cfg.rho_resolution
    }

    /// Bin index of `rho`, if it lies inside the grid.
    pub fn rho_index(&self, rho: f64) -> Option<usize> {
        let i = libm::round(rho / self.cfg.rho_resolution) as isize + self.rho_half as isize;
        (0..self.n_rho as isize).contains(&i).then_some(i as usize)
    }

    pub fn total_votes(&self) -> u64 {
        self.votes.iter().map(|&v| u64::from(v)).sum()
    }

    pub fn max_votes(&self) -> u32 {
        self.votes.iter().copied().max().unwrap_or(0)
    }
}

/// Every edge pixel votes once per theta bin, at its rho rounded to the nearest bin.
pub fn hough_accumulate(edges: &EdgeMap, cfg: &HoughConfig) -> Result<HoughAccumulator> {
    cfg.validate()?;
    let diag = libm::sqrt((edges.width() * edges.width() + edges.height() * edges.height()) as f64);
    let rho_half = libm::ceil(diag / cfg.rho_resolution) as usize;
    let n_rho = 2 * rho_half + 1;
    let n_theta = cfg.theta_bins();
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| {
            let r = cfg.theta_at(t).to_radians();
            (libm::cos(r), libm::sin(r))
        })
        .collect();
    let mut votes = vec![0u32; n_theta * n_rho];
    for (x, y) in edges.points() {
        let (x, y) = (x as f64, y as f64);
        for (t, &(c, s)) in trig.iter().enumerate() {
            let bin = libm::round((x * c + y * s) / cfg.rho_resolution) as isize + rho_half as isize;
            votes[t * n_rho + bin as usize] += 1;
        }
    }
    Ok(HoughAccumulator { cfg: *cfg, n_theta, n_rho, rho_half, votes })
}

/// Global maximum of the accumulator; ties go to the smaller theta bin, then the smaller rho bin.
pub fn hough_peak(acc: &HoughAccumulator) -> Result<LineRT> {
    let mut best: Option<(usize, usize, u32)> = None;
    for t in 0..acc.n_theta {
        for r in 0..acc.n_rho {
            let v = acc.get(t, r);
            if v > 0 && best.is_none_or(|(_, _, b)| v > b) {
                best = Some((t, r, v));
            }
        }
    }
    let (t, r, votes) = best.ok_or(Error::NoLine)?;
    Ok(LineRT { rho: acc.rho_at(r), theta: acc.cfg.theta_at(t), votes })
}

/// Accepts an accumulator peak as an endplate if enough pixels support it.
pub fn endplate_from(acc: &HoughAccumulator) -> Result<LineRT> {
    let line = hough_peak(acc)?;
    if line.votes < acc.cfg.min_votes {
        return Err(Error::NoLine);
    }
    Ok(line)
}

/// Distance in pixels within which edge pixels count as lying on a peak line
/// during refinement.
pub const REFINE_BAND: f64 = 1.5;

/// Largest spacing, along the line, between consecutive pixels of one run.
pub const REFINE_GAP: f64 = 3.0;

/// Cap on fit iterations; fits normally settle within three or four.
pub const REFINE_MAX_ITER: usize = 10;

/// Most accumulator peaks refined when choosing an endplate.
pub const REFINE_CANDIDATES: usize = 8;

/// Pixels of the longest run along direction `(-s, c)` whose consecutive
/// spacing stays within [`REFINE_GAP`].
fn longest_run(mut pts: Vec<(f64, f64)>, c: f64, s: f64) -> Vec<(f64, f64)> {
    let along = |p: &(f64, f64)| -p.0 * s + p.1 * c;
    pts.sort_by(|a, b| along(a).total_cmp(&along(b)));
    let (mut best, mut start) = (0..0, 0);
    for i in 1..=pts.len() {
        if i == pts.len() || along(&pts[i]) - along(&pts[i - 1]) > REFINE_GAP {
            if i - start > best.len() {
                best = start..i;
            }
            start = i;
        }
    }
    pts.truncate(best.end);
    pts.drain(..best.start);
    pts
}

/// A continuous line fitted to one run of edge pixels, in centred coordinates.
/// `tilt` is the normal angle minus 90 degrees, so a mirror negates it.
#[derive(Debug, Clone, Copy)]
struct Fit {
    tilt: f64,
    centroid: (f64, f64),
    support: usize,
    sse: f64,
}

impl Fit {
    fn beats(&self, other: &Fit) -> bool {
        (other.support, self.sse, libm::fabs(self.tilt)) < (self.support, other.sse, libm::fabs(other.tilt))
    }
}

/// `(cos, sin)` of the normal angle `90 + tilt`, written so that opposite
/// tilts give exactly negated cosines.
fn normal(tilt: f64) -> (f64, f64) {
    let phi = tilt.to_radians();
    (-libm::sin(phi), libm::cos(phi))
}

/// Edge pixels relative to the centre of the map, where a horizontal mirror
/// just negates `x`, and that centre.
fn centred_points(edges: &EdgeMap) -> (Vec<(f64, f64)>, (f64, f64)) {
    let centre = ((edges.width() as f64 - 1.0) / 2.0, (edges.height() as f64 - 1.0) / 2.0);
    let pts = edges.points().map(|(x, y)| (x as f64 - centre.0, y as f64 - centre.1)).collect();
    (pts, centre)
}

/// Total-least-squares fit of a run. Centred coordinates are multiples of one
/// half, so the moments are summed exactly as integers over doubled values and
/// the result does not depend on pixel order.
fn tls(run: &[(f64, f64)]) -> Fit {
    let n = run.len() as i128;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for &(x, y) in run {
        let (x, y) = ((2.0 * x) as i128, (2.0 * y) as i128);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    // Scatter sums scaled by 4n.
    let a = (n * sxx - sx * sx) as f64;
    let b = (n * sxy - sx * sy) as f64;
    let c = (n * syy - sy * sy) as f64;
    // Direction of largest spread; the normal is perpendicular to it.
    let tilt = (0.5 * libm::atan2(2.0 * b, a - c)).to_degrees();
    let smallest = 0.5 * ((a + c) - libm::sqrt((a - c) * (a - c) + 4.0 * b * b));
    let scale = 2.0 * n as f64;
    Fit {
        tilt,
        centroid: (sx as f64 / scale, sy as f64 / scale),
        support: run.len(),
        sse: smallest.max(0.0) / (2.0 * scale),
    }
}

/// Alternates between collecting the longest run near the current line and
/// refitting it by total least squares, until the run stops changing.
fn fit_from(pts: &[(f64, f64)], tilt: f64, rho: f64) -> Option<Fit> {
    let (mut tilt, mut rho) = (tilt, rho);
    let mut previous: Option<Vec<(f64, f64)>> = None;
    let mut fit = None;
    for _ in 0..REFINE_MAX_ITER {
        let (c, s) = normal(tilt);
        let near: Vec<(f64, f64)> = pts.iter().copied().filter(|&(x, y)| (x * c + y * s - rho).abs() <= REFINE_BAND).collect();
        let mut run = longest_run(near, c, s);
        if run.len() < 2 {
            break;
        }
        run.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        if previous.as_ref() == Some(&run) {
            break;
        }
        let f = tls(&run);
        let (c, s) = normal(f.tilt);
        (tilt, rho) = (f.tilt, f.centroid.0 * c + f.centroid.1 * s);
        fit = Some(f);
        previous = Some(run);
    }
    fit
}

/// Snaps a fit onto the bin grid; `votes` is the edge count of the snapped bin.
/// A fit halfway between two theta bins goes to the one nearer 90 degrees.
fn snap(edges: &EdgeMap, fit: &Fit, centre: (f64, f64), cfg: &HoughConfig) -> Option<LineRT> {
    let offset = |t: usize| cfg.theta_at(t) - 90.0;
    let t = (0..cfg.theta_bins()).min_by(|&i, &j| {
        let key = |t: usize| (libm::fabs(offset(t) - fit.tilt), libm::fabs(offset(t)));
        key(i).partial_cmp(&key(j)).unwrap_or(core::cmp::Ordering::Equal)
    })?;
    let theta = cfg.theta_at(t);
    let (c, s) = (libm::cos(theta.to_radians()), libm::sin(theta.to_radians()));
    let (mx, my) = (fit.centroid.0 + centre.0, fit.centroid.1 + centre.1);
    let rho_bin = libm::round((mx * c + my * s) / cfg.rho_resolution);
    let votes = edges
        .points()
        .filter(|&(x, y)| libm::round((x as f64 * c + y as f64 * s) / cfg.rho_resolution) == rho_bin)
        .count() as u32;
    (votes > 0).then_some(LineRT { rho: rho_bin * cfg.rho_resolution, theta, votes })
}

/// Total-least-squares fit to the longest run of edge pixels within
/// [`REFINE_BAND`] of `line`, iterated until the run is stable, with the fitted
/// normal angle and offset snapped to the nearest bins inside the configured
/// band. `votes` is the accumulator count of the snapped bin.
///
/// A short digital segment falls into a single 1 px rho bin over a range of
/// several theta bins, so the raw peak alone can be off by a few degrees.
pub fn refine_line(edges: &EdgeMap, line: &LineRT, cfg: &HoughConfig) -> LineRT {
    let (pts, centre) = centred_points(edges);
    let tilt = line.theta - 90.0;
    let (c, s) = normal(tilt);
    fit_from(&pts, tilt, line.rho - (centre.0 * c + centre.1 * s))
        .and_then(|f| snap(edges, &f, centre, cfg))
        .unwrap_or(*line)
}

/// Start lines for refinement, as `(tilt, rho)`: local maxima of a centre-origin accumulator
/// holding at least half its peak count and `min_votes`, strongest first.
/// Around a band symmetric about 90 degrees, a mirrored map gives the mirrored
/// list.
fn candidate_lines(pts: &[(f64, f64)], half_diag: f64, cfg: &HoughConfig) -> Vec<(f64, f64)> {
    let rho_half = libm::ceil(half_diag / cfg.rho_resolution) as usize + 1;
    let (n_theta, n_rho) = (cfg.theta_bins(), 2 * rho_half + 1);
    let mut votes = vec![0u32; n_theta * n_rho];
    for t in 0..n_theta {
        let (c, s) = normal(cfg.theta_at(t) - 90.0);
        for &(x, y) in pts {
            let bin = libm::round((x * c + y * s) / cfg.rho_resolution) as isize + rho_half as isize;
            votes[t * n_rho + bin as usize] += 1;
        }
    }
    let at = |t: usize, r: usize| votes[t * n_rho + r];
    let max = votes.iter().copied().max().unwrap_or(0);
    let floor = cfg.min_votes.max(libm::ceil(f64::from(max) / 2.0) as u32).max(1);
    let mut peaks = Vec::new();
    for t in 0..n_theta {
        for r in 0..n_rho {
            let v = at(t, r);
            if v < floor {
                continue;
            }
            let dominated = (t.saturating_sub(1)..=(t + 1).min(n_theta - 1))
                .flat_map(|tt| (r.saturating_sub(1)..=(r + 1).min(n_rho - 1)).map(move |rr| (tt, rr)))
                .any(|(tt, rr)| at(tt, rr) > v);
            if !dominated {
                peaks.push((v, t, r));
            }
        }
    }
    peaks.sort_by_key(|p| core::cmp::Reverse(p.0));
    // Keep ties at the cut so the list does not depend on their order.
    if let Some(&(cut, _, _)) = peaks.get(REFINE_CANDIDATES.saturating_sub(1)) {
        peaks.retain(|p| p.0 >= cut);
    }
    peaks
        .into_iter()
        .map(|(_, t, r)| (cfg.theta_at(t) - 90.0, (r as f64 - rho_half as f64) * cfg.rho_resolution))
        .collect()
}

/// The dominant line of the edge map within the configured theta band.
///
/// With the default band this is the longest near-horizontal line, which on a
/// cropped vertebra is an endplate. Every edge pixel votes in every theta bin,
/// so a wall outside the band still leaves scattered low counts inside it;
/// peaks below `min_votes` are rejected with [`Error::NoLine`].
///
/// With `refine` set, the strongest peaks (about [`REFINE_CANDIDATES`]) are
/// each refined as in [`refine_line`], and the fit with the longest run wins,
/// ties going to the smaller squared residual and then the smaller tilt.
/// Peaks and fits are taken about the map centre, so the choice depends on the
/// edge geometry rather than on where the bin grid falls, and a mirrored ROI
/// yields the mirrored line.
pub fn detect_endplate(edges: &EdgeMap, cfg: &HoughConfig) -> Result<LineRT> {
    endplate_in(edges, &hough_accumulate(edges, cfg)?)
}

/// [`detect_endplate`] on an accumulator already built from `edges`.
pub fn endplate_in(edges: &EdgeMap, acc: &HoughAccumulator) -> Result<LineRT> {
    let peak = endplate_from(acc)?;
    if !acc.cfg.refine {
        return Ok(peak);
    }
    let (pts, centre) = centred_points(edges);
    let half_diag = libm::sqrt(centre.0 * centre.0 + centre.1 * centre.1);
    let mut best: Option<Fit> = None;
    for (tilt, rho) in candidate_lines(&pts, half_diag, &acc.cfg) {
        if let Some(fit) = fit_from(&pts, tilt, rho) {
            if best.as_ref().is_none_or(|b| fit.beats(b)) {
                best = Some(fit);
            }
        }
    }
    Ok(best.and_then(|f| snap(edges, &f, centre, &acc.cfg)).unwrap_or(peak))
}

/// Inclination of the line from horizontal, `theta - 90`, in degrees.
/// Positive values descend left to right in image coordinates.
pub fn line_slope_deg(line: &LineRT) -> f64 {
    line.theta - 90.0
}
