use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::format_float;
use crate::cvt::{CentroidSet, CvtBuilder};
use crate::error::{Error, Result};

/// Overrides the directory where tessellations are cached.
pub const CENTROID_CACHE_ENV: &str = "ELITE_ILLUM_CENTROID_CACHE";

/// `k dim` header, then one centroid per line.
pub fn write_centroids(set: &CentroidSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", set.len(), set.dim()));
    for c in set.iter() {
        let row: Vec<String> = c.iter().map(|&v| format_float(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    // Write-then-rename so a concurrent reader never sees a partial file.
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_centroids(path: &Path, seed: u64) -> Result<CentroidSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::parse(path, 1, format!("invalid header '{header}'")))
    };
    if fields.len() != 2 {
        return Err(Error::parse(path, 1, format!("invalid header '{header}'")));
    }
    let k = parse_count(fields[0])?;
    let dim = parse_count(fields[1])?;

    let mut points = Vec::with_capacity(k);
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if points.len() == k {
            if line.is_empty() {
                continue;
            }
            return Err(Error::parse(path, line_no, "more centroids than declared"));
        }
        let row = line
            .split(' ')
            .map(|f| super::parse_float(path, line_no, f))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {dim} coordinates, found {}", row.len()),
            ));
        }
        points.push(row);
    }
    if points.len() != k {
        return Err(Error::parse(
            path,
            points.len() as u64 + 1,
            format!("expected {k} centroids, found {}", points.len()),
        ));
    }
    CentroidSet::from_points(points, seed).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// Cache directory: explicit choice, then the environment override, then
/// `<out>/centroids`.
pub fn centroid_cache_dir(explicit: Option<&Path>, out: &Path) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    match std::env::var_os(CENTROID_CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out.join("centroids"),
    }
}

pub fn centroid_cache_file(dir: &Path, task: &str, k: usize, samples: usize, seed: u64) -> PathBuf {
    dir.join(format!("{task}-k{k}-n{samples}-s{seed}.cvt"))
}

/// Loads a cached tessellation or builds and caches it.
pub fn load_or_build_centroids(dir: &Path, task: &str, builder: &CvtBuilder) -> Result<CentroidSet> {
    let path = centroid_cache_file(dir, task, builder.k, builder.samples, builder.seed);
    if path.exists() {
        let set = read_centroids(&path, builder.seed)?;
        if set.len() != builder.k || set.dim() != builder.bounds.len() {
            return Err(Error::parse(
                &path,
                1,
                format!(
                    "cached tessellation is {}x{}, expected {}x{}",
                    set.len(),
                    set.dim(),
                    builder.k,
                    builder.bounds.len()
                ),
            ));
        }
        log::debug!("loaded centroids from {}", path.display());
        return Ok(set);
    }
    log::info!(
        "building {}-niche tessellation for {task} ({} samples)",
        builder.k,
        builder.samples
    );
    let set = builder.build()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_centroids(&set, &path)?;
    Ok(set)
}
