use std::path::Path;

use super::{csv_error, csv_reader, csv_writer, format_float, format_opt, parse_float, parse_opt_float};
use crate::archive::{Archive, Individual};
use crate::error::{Error, Result};

/// An archive read back from CSV, with the dimensions found in its header.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveFile {
    pub archive: Archive,
    pub behavior_dim: usize,
    pub genotype_dim: usize,
    pub has_sigma: bool,
}

fn header(behavior_dim: usize, genotype_dim: usize, sigma: bool) -> Vec<String> {
    let mut h = vec!["niche".to_string(), "fitness".to_string()];
    h.extend((1..=behavior_dim).map(|i| format!("b_{i}")));
    h.extend((1..=genotype_dim).map(|i| format!("g_{i}")));
    if sigma {
        h.push("sigma".into());
    }
    h
}

/// Writes occupied niches in ascending order. A `sigma` column is added
/// when any elite carries a strength.
pub fn write_archive(
    archive: &Archive,
    behavior_dim: usize,
    genotype_dim: usize,
    path: &Path,
) -> Result<()> {
    let elites = archive.elites();
    for (niche, e) in &elites {
        if e.descriptor.len() != behavior_dim || e.genotype.len() != genotype_dim {
            return Err(Error::Contract(format!(
                "elite in niche {niche} does not match layout {behavior_dim}+{genotype_dim}"
            )));
        }
    }
    let sigma = elites.iter().any(|(_, e)| e.sigma.is_some());
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| csv_error(path, e);
    w.write_record(header(behavior_dim, genotype_dim, sigma)).map_err(err)?;
    for (niche, e) in elites {
        let mut row = Vec::with_capacity(3 + behavior_dim + genotype_dim);
        row.push(niche.to_string());
        row.push(format_float(e.fitness));
        row.extend(e.descriptor.iter().map(|&v| format_float(v)));
        row.extend(e.genotype.iter().map(|&v| format_float(v)));
        if sigma {
            row.push(format_opt(e.sigma));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_header(path: &Path, fields: &csv::StringRecord) -> Result<(usize, usize, bool)> {
    let bad = |msg: String| Error::parse(path, 1, msg);
    let cols: Vec<&str> = fields.iter().collect();
    if cols.len() < 2 || cols[0] != "niche" || cols[1] != "fitness" {
        return Err(bad("header must start with 'niche,fitness'".into()));
    }
    let rest = &cols[2..];
    let sigma = rest.last() == Some(&"sigma");
    let rest = if sigma { &rest[..rest.len() - 1] } else { rest };
    let behavior_dim = rest.iter().take_while(|c| c.starts_with("b_")).count();
    let genotype_dim = rest.len() - behavior_dim;
    if header(behavior_dim, genotype_dim, sigma) != cols {
        return Err(bad(format!("unexpected header '{}'", cols.join(","))));
    }
    Ok((behavior_dim, genotype_dim, sigma))
}

/// Reads an archive CSV. `capacity` defaults to one past the largest niche.
pub fn read_archive(path: &Path, capacity: Option<usize>) -> Result<ArchiveFile> {
    let mut reader = csv_reader(path)?;
    let mut records = reader.records();
    let head = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let (behavior_dim, genotype_dim, has_sigma) = parse_header(path, &head)?;
    let width = head.len();

    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::parse(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let niche: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid niche '{}'", &record[0])))?;
        let fitness = parse_float(path, line, &record[1])?;
        let nums = |range: std::ops::Range<usize>| {
            range
                .map(|i| parse_float(path, line, &record[i]))
                .collect::<Result<Vec<f64>>>()
        };
        let descriptor = nums(2..2 + behavior_dim)?;
        let genotype = nums(2 + behavior_dim..2 + behavior_dim + genotype_dim)?;
        let sigma = if has_sigma {
            parse_opt_float(path, line, &record[width - 1])?
        } else {
            None
        };
        rows.push((
            line,
            niche,
            Individual::new(genotype, fitness, descriptor).with_sigma(sigma),
        ));
    }

    let capacity = capacity.unwrap_or_else(|| rows.iter().map(|r| r.1 + 1).max().unwrap_or(0));
    let mut archive = Archive::new(capacity);
    for (line, niche, ind) in rows {
        archive
            .restore(niche, ind)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
    }
    Ok(ArchiveFile {
        archive,
        behavior_dim,
        genotype_dim,
        has_sigma,
    })
}
