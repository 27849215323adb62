use std::path::Path;

use super::{csv_error, csv_writer, format_float};
use crate::engine::{AggregateRow, Quartiles};
use crate::error::{Error, Result};

const METRICS: [&str; 5] = [
    "archive_size",
    "mean_fitness",
    "max_fitness",
    "spread",
    "similarity",
];

/// Final-checkpoint position of one operator on the size/fitness plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoEntry {
    pub operator: String,
    pub median_archive_size: f64,
    pub median_mean_fitness: f64,
    /// Another operator is at least as good on both axes and better on one.
    pub dominated: bool,
}

fn row_quartiles(row: &AggregateRow) -> [Option<Quartiles>; 5] {
    [
        row.archive_size,
        row.mean_fitness,
        row.max_fitness,
        row.spread,
        row.similarity,
    ]
}

/// Marks dominated entries among `(operator, median archive size, median
/// mean fitness)` points, keeping input order.
pub fn pareto_front(points: &[(String, f64, f64)]) -> Vec<ParetoEntry> {
    points
        .iter()
        .map(|(op, size, fit)| {
            let dominated = points.iter().any(|(_, s, f)| {
                s >= size && f >= fit && (s > size || f > fit)
            });
            ParetoEntry {
                operator: op.clone(),
                median_archive_size: *size,
                median_mean_fitness: *fit,
                dominated,
            }
        })
        .collect()
}

/// Writes `summary.csv` (quartiles per checkpoint and operator) and
/// `pareto.csv` (final checkpoint of each operator) into `dir`.
pub fn write_campaign_summary(groups: &[(&str, &[AggregateRow])], dir: &Path) -> Result<()> {
    let path = dir.join("summary.csv");
    let mut w = csv_writer(&path)?;
    let err = |e: csv::Error| csv_error(&path, e);
    let mut header = vec!["operator".to_string(), "evals".into(), "replicates".into()];
    for m in METRICS {
        for q in ["q25", "median", "q75"] {
            header.push(format!("{m}_{q}"));
        }
    }
    w.write_record(&header).map_err(err)?;
    for (op, rows) in groups {
        for row in rows.iter() {
            let mut rec = vec![op.to_string(), row.evaluations.to_string(), row.replicates.to_string()];
            for q in row_quartiles(row) {
                match q {
                    Some(q) => rec.extend([q.q25, q.median, q.q75].map(format_float)),
                    None => rec.extend(std::iter::repeat_n(String::new(), 3)),
                }
            }
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let points: Vec<(String, f64, f64)> = groups
        .iter()
        .filter_map(|(op, rows)| {
            let last = rows.last()?;
            Some((op.to_string(), last.archive_size?.median, last.mean_fitness?.median))
        })
        .collect();
    let path = dir.join("pareto.csv");
    let mut w = csv_writer(&path)?;
    let err = |e: csv::Error| csv_error(&path, e);
    w.write_record(["operator", "median_archive_size", "median_mean_fitness", "dominated"])
        .map_err(err)?;
    for e in pareto_front(&points) {
        w.write_record([
            e.operator,
            format_float(e.median_archive_size),
            format_float(e.median_mean_fitness),
            e.dominated.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
