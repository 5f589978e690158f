//! Observation and MAD-table CSV files.

use std::io::{Read, Write};

use cobb_core::reliability::format_percent;
use cobb_core::{
    inter_observer_table, intra_observer_table, summarize, MadTable, Method, Observation, ObservationSet,
};

pub const OBSERVATION_HEADER: [&str; 6] = ["image_id", "observer_id", "session_id", "group", "method", "cobb_deg"];

/// Reads `image_id,observer_id,session_id,group,method,cobb_deg` records.
pub fn read_observations<R: Read>(input: R) -> csv::Result<ObservationSet> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let records = r.deserialize().collect::<csv::Result<Vec<Observation>>>()?;
    Ok(ObservationSet::new(records))
}

/// Writes observations with `cobb_deg` at two decimals. An empty set gives
/// the header line alone.
pub fn write_observations<'a, W: Write>(
    records: impl IntoIterator<Item = &'a Observation>,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OBSERVATION_HEADER)?;
    for o in records {
        w.write_record([
            o.image_id.as_str(),
            o.observer_id.as_str(),
            o.session_id.as_str(),
            &o.group.to_string(),
            &o.method.to_string(),
            &format!("{:.2}", o.cobb_deg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Comparison values for the percent-reduction lines of a MAD report.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Comparison {
    pub intra: Option<f64>,
    pub inter: Option<f64>,
}

/// Intra- and inter-observer tables plus overall means, as CSV:
/// `table,group,observer,method,mad,images`. Overall means use group `ALL`
/// and count cells rather than images; with a comparison value the row also
/// carries `reduction_pct`.
pub fn write_mad_tables<W: Write>(obs: &ObservationSet, cmp: Comparison, out: W) -> csv::Result<Vec<String>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["table", "group", "observer", "method", "mad", "images", "reduction_pct"])?;
    let mut skipped = Vec::new();
    for (name, table, other) in [
        ("intra", intra_observer_table(obs), cmp.intra),
        ("inter", inter_observer_table(obs), cmp.inter),
    ] {
        write_table(&mut w, name, &table, other)?;
        skipped.extend(table.skipped.iter().map(|s| format!("{name}: {s}")));
    }
    w.flush()?;
    Ok(skipped)
}

fn write_table<W: Write>(w: &mut csv::Writer<W>, name: &str, table: &MadTable, other: Option<f64>) -> csv::Result<()> {
    for c in &table.cells {
        w.write_record([
            name,
            &c.group.to_string(),
            c.observer.as_deref().unwrap_or(""),
            &c.method.to_string(),
            &format!("{:.2}", c.mad),
            &c.images.to_string(),
            "",
        ])?;
    }
    let summary = summarize(table);
    for method in [Method::Manual, Method::Digital] {
        let Some(mean) = summary.mean(method) else { continue };
        let cells = table.cells.iter().filter(|c| c.method == method).count();
        let reduction = summary.reduction_vs(method, other.unwrap_or(f64::NAN)).filter(|r| r.is_finite());
        w.write_record([
            name,
            "ALL",
            "",
            &method.to_string(),
            &format!("{mean:.2}"),
            &cells.to_string(),
            &reduction.map(format_percent).unwrap_or_default(),
        ])?;
    }
    Ok(())
}
