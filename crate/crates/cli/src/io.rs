//! CSV tables: comma separated, header row, LF line endings.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patspec::calibration::{RawRow, RawScan};
use patspec::fitting::{PeakSeries, SeriesKind, SeriesPoint};
use serde::Deserialize;

/// Open a writer with the fixed dialect.
pub fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

/// Write a header and rows of already formatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))
}

fn rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (k, r) in reader(path)?.deserialize().enumerate() {
        out.push(r.with_context(|| format!("{}: record {}", path.display(), k + 1))?);
    }
    if out.is_empty() {
        bail!("{} contains no data rows", path.display());
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SeriesRecord {
    #[serde(rename = "nu_GHz")]
    nu: f64,
    #[serde(rename = "B_T")]
    b_ext: f64,
    kind: String,
    #[serde(rename = "delta_eps_ueV")]
    delta_eps: f64,
    #[serde(rename = "sigma_ueV", default)]
    sigma: Option<f64>,
}

pub const SERIES_HEADER: [&str; 5] = ["nu_GHz", "B_T", "kind", "delta_eps_ueV", "sigma_ueV"];

/// Line-distance series grouped by drive frequency, in ascending frequency.
pub fn read_series(path: &Path) -> Result<Vec<PeakSeries>> {
    let mut groups: BTreeMap<u64, (f64, Vec<SeriesPoint>)> = BTreeMap::new();
    for r in rows::<SeriesRecord>(path)? {
        if !(r.nu > 0.0) {
            bail!("{}: drive frequency must be positive, got {}", path.display(), r.nu);
        }
        let point = SeriesPoint {
            b_ext: r.b_ext,
            delta_eps: r.delta_eps,
            kind: SeriesKind::parse(&r.kind)?,
            sigma: r.sigma,
        };
        groups
            .entry(r.nu.to_bits())
            .or_insert_with(|| (r.nu, Vec::new()))
            .1
            .push(point);
    }
    let mut series: Vec<PeakSeries> = groups.into_values().map(|(nu, p)| PeakSeries::new(nu, p)).collect();
    series.sort_by(|a, b| a.nu.total_cmp(&b.nu));
    Ok(series)
}

pub fn series_rows(series: &PeakSeries) -> impl Iterator<Item = Vec<String>> + '_ {
    series.points.iter().map(|p| {
        vec![
            num(series.nu),
            num(p.b_ext),
            p.kind.label().to_string(),
            num(p.delta_eps),
            p.sigma.map(num).unwrap_or_default(),
        ]
    })
}

#[derive(Deserialize)]
struct RelaxRecord {
    tau_ns: f64,
    signal: f64,
}

pub const RELAX_HEADER: [&str; 2] = ["tau_ns", "signal"];

pub fn read_relaxation(path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(rows::<RelaxRecord>(path)?
        .into_iter()
        .map(|r| (r.tau_ns, r.signal))
        .collect())
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(rename = "B_T")]
    b_ext: f64,
    #[serde(rename = "gate_mV")]
    gate_mv: f64,
    signal: f64,
}

pub const RAW_HEADER: [&str; 3] = ["B_T", "gate_mV", "signal"];

/// Raw scan in long format; rows are grouped by field in order of first
/// appearance.
pub fn read_raw_scan(path: &Path, p_eps_mv: f64) -> Result<RawScan> {
    let mut out: Vec<RawRow> = Vec::new();
    for r in rows::<RawRecord>(path)? {
        match out.iter_mut().find(|row| row.b_ext == r.b_ext) {
            Some(row) => {
                row.gate_mv.push(r.gate_mv);
                row.signal.push(r.signal);
            }
            None => out.push(RawRow {
                b_ext: r.b_ext,
                gate_mv: vec![r.gate_mv],
                signal: vec![r.signal],
            }),
        }
    }
    let scan = RawScan { rows: out, p_eps_mv };
    scan.validate()?;
    Ok(scan)
}

pub fn raw_rows(scan: &RawScan) -> impl Iterator<Item = Vec<String>> + '_ {
    scan.rows.iter().flat_map(|row| {
        row.gate_mv
            .iter()
            .zip(&row.signal)
            .map(move |(v, s)| vec![num(row.b_ext), num(*v), num(*s)])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip_groups_by_frequency() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let a = PeakSeries::new(
            20.0,
            vec![SeriesPoint {
                b_ext: 1.5,
                delta_eps: 30.25,
                kind: SeriesKind::Plus,
                sigma: None,
            }],
        );
        let b = PeakSeries::new(
            11.0,
            vec![SeriesPoint {
                b_ext: 1.2,
                delta_eps: -40.0,
                kind: SeriesKind::Prime,
                sigma: Some(0.5),
            }],
        );
        write_table(&path, &SERIES_HEADER, series_rows(&a).chain(series_rows(&b))).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(read_series(&path).unwrap(), vec![b, a]);
    }

    #[test]
    fn empty_table_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        std::fs::write(&path, "tau_ns,signal\n").unwrap();
        assert!(read_relaxation(&path).is_err());
    }
}
