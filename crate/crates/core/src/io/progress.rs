use std::path::Path;

use super::{csv_error, csv_reader, csv_writer, format_opt, parse_opt_float};
use crate::error::{Error, Result};
use crate::metrics::MetricsSnapshot;

const PROGRESS_HEADER: [&str; 6] = [
    "evals",
    "archive_size",
    "mean_fitness",
    "max_fitness",
    "spread",
    "similarity",
];

const FINALS_HEADER: [&str; 7] = [
    "seed",
    "evals",
    "archive_size",
    "mean_fitness",
    "max_fitness",
    "spread",
    "similarity",
];

fn snapshot_fields(s: &MetricsSnapshot) -> [String; 6] {
    [
        s.evaluations.to_string(),
        s.archive_size.to_string(),
        format_opt(s.mean_fitness),
        format_opt(s.max_fitness),
        format_opt(s.spread),
        format_opt(s.similarity),
    ]
}

fn parse_int<T: std::str::FromStr>(path: &Path, line: u64, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} '{field}'")))
}

fn parse_snapshot(path: &Path, line: u64, f: &[&str]) -> Result<MetricsSnapshot> {
    Ok(MetricsSnapshot {
        evaluations: parse_int(path, line, f[0], "evaluation count")?,
        archive_size: parse_int(path, line, f[1], "archive size")?,
        mean_fitness: parse_opt_float(path, line, f[2])?,
        max_fitness: parse_opt_float(path, line, f[3])?,
        spread: parse_opt_float(path, line, f[4])?,
        similarity: parse_opt_float(path, line, f[5])?,
    })
}

/// Runs `row` over every data record after checking the header.
fn read_rows<T>(
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(u64, &[&str]) -> Result<T>,
) -> Result<Vec<T>> {
    let mut reader = csv_reader(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let fields: Vec<&str> = record.iter().collect();
        if i == 0 {
            if fields != header {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected header '{}'", header.join(",")),
                ));
            }
            continue;
        }
        if fields.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        out.push(row(line, &fields)?);
    }
    if out.is_empty() && std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(false) {
        return Err(Error::parse(path, 1, "missing header"));
    }
    Ok(out)
}

pub fn write_progress(snapshots: &[MetricsSnapshot], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| csv_error(path, e);
    w.write_record(PROGRESS_HEADER).map_err(err)?;
    for s in snapshots {
        w.write_record(snapshot_fields(s)).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_progress(path: &Path) -> Result<Vec<MetricsSnapshot>> {
    read_rows(path, &PROGRESS_HEADER, |line, f| parse_snapshot(path, line, f))
}

/// One row per replicate: its seed and last snapshot.
pub fn write_finals(finals: &[(u64, MetricsSnapshot)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| csv_error(path, e);
    w.write_record(FINALS_HEADER).map_err(err)?;
    for (seed, s) in finals {
        let mut row = vec![seed.to_string()];
        row.extend(snapshot_fields(s));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_finals(path: &Path) -> Result<Vec<(u64, MetricsSnapshot)>> {
    read_rows(path, &FINALS_HEADER, |line, f| {
        let seed = parse_int(path, line, f[0], "seed")?;
        Ok((seed, parse_snapshot(path, line, &f[1..])?))
    })
}
