//! Measurement variability: mean absolute deviation per image, averaged per
//! curve-severity group, for repeated sessions of one observer (intra) and
//! for different observers (inter).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Curve severity class: under 10, 10 to 25, 25 to 40 and over 40 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
    G3,
    G4,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::G1, Group::G2, Group::G3, Group::G4];

    pub fn from_angle(deg: f64) -> Self {
        if deg < 10.0 {
            Group::G1
        } else if deg <= 25.0 {
            Group::G2
        } else if deg <= 40.0 {
            Group::G3
        } else {
            Group::G4
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G1" => Ok(Group::G1),
            "G2" => Ok(Group::G2),
            "G3" => Ok(Group::G3),
            "G4" => Ok(Group::G4),
            _ => Err(Error::InvalidConfig("group must be one of G1, G2, G3, G4")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Manual,
    Digital,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Manual => "manual",
            Method::Digital => "digital",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "manual" => Ok(Method::Manual),
            "digital" => Ok(Method::Digital),
            _ => Err(Error::InvalidConfig("method must be manual or digital")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub image_id: String,
    pub observer_id: String,
    pub session_id: String,
    pub group: Group,
    pub method: Method,
    pub cobb_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationSet {
    pub records: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(records: Vec<Observation>) -> Self {
        Self { records }
    }
}

/// Mean absolute deviation from the arithmetic mean, `sum |x - mean| / n`.
pub fn mad(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|x| (x - mean).abs()).sum::<f64>() / n)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

/// One table cell: the group-average MAD for a method, per observer for intra
/// tables and across observers (`observer = None`) for inter tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadCell {
    pub group: Group,
    pub observer: Option<String>,
    pub method: Method,
    pub mad: f64,
    /// Images that contributed.
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MadTable {
    pub cells: Vec<MadCell>,
    /// Images left out, with the reason.
    pub skipped: Vec<String>,
}

impl MadTable {
    pub fn from_cells(cells: Vec<MadCell>) -> Self {
        Self { cells, skipped: Vec::new() }
    }

    pub fn cell(&self, group: Group, observer: Option<&str>, method: Method) -> Option<&MadCell> {
        self.cells
            .iter()
            .find(|c| c.group == group && c.method == method && c.observer.as_deref() == observer)
    }
}

/// Intra-observer variability: MAD over each observer's sessions of one image,
/// then averaged over the group's images, per (group, observer, method).
///
/// Images measured in a single session are skipped and listed in `skipped`.
pub fn intra_observer_table(obs: &ObservationSet) -> MadTable {
    let mut per_image: BTreeMap<(Group, &str, Method, &str), Vec<f64>> = BTreeMap::new();
    for r in &obs.records {
        per_image
            .entry((r.group, r.observer_id.as_str(), r.method, r.image_id.as_str()))
            .or_default()
            .push(r.cobb_deg);
    }
    let mut cells: BTreeMap<(Group, &str, Method), Vec<f64>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for ((group, observer, method, image), values) in per_image {
        if values.len() < 2 {
            skipped.push(format!("image {image}, observer {observer}, {method}: only one session"));
            continue;
        }
        let m = mad(&sorted(values)).expect("at least two values");
        cells.entry((group, observer, method)).or_default().push(m);
    }
    MadTable {
        cells: cells
            .into_iter()
            .map(|((group, observer, method), mads)| MadCell {
                group,
                observer: Some(String::from(observer)),
                method,
                mad: mean(&mads),
                images: mads.len(),
            })
            .collect(),
        skipped,
    }
}

/// Inter-observer variability: each observer's sessions of an image are averaged,
/// the MAD is taken across observers, and per-image MADs are averaged per
/// (group, method).
///
/// Images seen by a single observer are skipped and listed in `skipped`.
pub fn inter_observer_table(obs: &ObservationSet) -> MadTable {
    let mut per_image: BTreeMap<(Group, Method, &str), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in &obs.records {
        per_image
            .entry((r.group, r.method, r.image_id.as_str()))
            .or_default()
            .entry(r.observer_id.as_str())
            .or_default()
            .push(r.cobb_deg);
    }
    let mut cells: BTreeMap<(Group, Method), Vec<f64>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for ((group, method, image), observers) in per_image {
        if observers.len() < 2 {
            skipped.push(format!("image {image}, {method}: only one observer"));
            continue;
        }
        let means: Vec<f64> = observers.into_values().map(|v| mean(&sorted(v))).collect();
        let m = mad(&sorted(means)).expect("at least two observers");
        cells.entry((group, method)).or_default().push(m);
    }
    MadTable {
        cells: cells
            .into_iter()
            .map(|((group, method), mads)| MadCell { group, observer: None, method, mad: mean(&mads), images: mads.len() })
            .collect(),
        skipped,
    }
}

/// Overall mean MAD per method across every cell of a table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub means: BTreeMap<Method, f64>,
}

impl Summary {
    pub fn mean(&self, method: Method) -> Option<f64> {
        self.means.get(&method).copied()
    }

    /// Percent reduction of this table's `method` mean against another technique's value.
    pub fn reduction_vs(&self, method: Method, other: f64) -> Option<f64> {
        self.mean(method).map(|ours| percent_reduction(ours, other))
    }
}

pub fn summarize(table: &MadTable) -> Summary {
    let mut by_method: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for c in &table.cells {
        by_method.entry(c.method).or_default().push(c.mad);
    }
    Summary { means: by_method.into_iter().map(|(m, v)| (m, mean(&v))).collect() }
}

/// `(other - ours) / other * 100`.
pub fn percent_reduction(ours: f64, other: f64) -> f64 {
    (other - ours) / other * 100.0
}

/// Formats a percentage cut (not rounded) to two decimals, e.g. 72.2991 as "72.29".
pub fn format_percent(p: f64) -> String {
    let hundredths = libm::trunc(p * 100.0 + if p >= 0.0 { 1e-7 } else { -1e-7 });
    format!("{:.2}", hundredths / 100.0)
}
