//! Genotypic spread and similarity of an elite set, archive performance
//! summaries, and the statistics used to compare runs.

mod stats;

pub use stats::{mann_whitney_u, quantile, MannWhitney};

use rayon::prelude::*;

use crate::archive::Archive;
use crate::error::{Error, Result};

/// Rows handled per parallel task in the pairwise pass.
const ROW_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSnapshot {
    pub evaluations: u64,
    pub archive_size: usize,
    pub mean_fitness: Option<f64>,
    pub max_fitness: Option<f64>,
    pub spread: Option<f64>,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchiveStats {
    pub size: usize,
    pub mean_fitness: Option<f64>,
    pub max_fitness: Option<f64>,
}

pub fn archive_stats(archive: &Archive) -> ArchiveStats {
    let elites = archive.elites();
    if elites.is_empty() {
        return ArchiveStats {
            size: 0,
            mean_fitness: None,
            max_fitness: None,
        };
    }
    let sum: f64 = elites.iter().map(|(_, e)| e.fitness).sum();
    let max = elites
        .iter()
        .map(|(_, e)| e.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    ArchiveStats {
        size: elites.len(),
        mean_fitness: Some(sum / elites.len() as f64),
        max_fitness: Some(max),
    }
}

/// Both elite-hypervolume metrics from one pairwise pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypervolume {
    /// `None` with fewer than two elites.
    pub spread: Option<f64>,
    pub similarity: f64,
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators so the loop vectorizes; the reduction
    // order is fixed, so results stay reproducible.
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += (x - y) * (x - y);
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail).sqrt()
}

fn check_lengths<G: AsRef<[f64]>>(elites: &[G], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Contract("genotype dimension must be positive".into()));
    }
    match elites.iter().position(|g| g.as_ref().len() != n) {
        Some(i) => Err(Error::Contract(format!(
            "elite {i} has length {}, expected {n}",
            elites[i].as_ref().len()
        ))),
        None => Ok(()),
    }
}

/// Per-elite nearest-neighbour distances and the sum of distances over
/// unordered pairs. Deterministic for any number of rayon threads.
fn pairwise_pass<G: AsRef<[f64]> + Sync>(elites: &[G]) -> (Vec<f64>, f64) {
    let m = elites.len();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
        .into_par_iter()
        .step_by(ROW_CHUNK)
        .map(|start| {
            let end = (start + ROW_CHUNK).min(m);
            let mut mins = vec![f64::INFINITY; m];
            let mut row_sums = Vec::with_capacity(end - start);
            for i in start..end {
                let xi = elites[i].as_ref();
                let mut row_sum = 0.0;
                let mut row_min = mins[i];
                for j in i + 1..m {
                    let d = euclidean(xi, elites[j].as_ref());
                    row_sum += d;
                    row_min = row_min.min(d);
                    if d < mins[j] {
                        mins[j] = d;
                    }
                }
                mins[i] = row_min;
                row_sums.push(row_sum);
            }
            (mins, row_sums)
        })
        .collect();

    let mut nearest = vec![f64::INFINITY; m];
    let mut total = 0.0;
    for (mins, row_sums) in &partials {
        for (acc, v) in nearest.iter_mut().zip(mins) {
            *acc = acc.min(*v);
        }
        for s in row_sums {
            total += s;
        }
    }
    (nearest, total)
}

/// Spread and similarity of `elites` in the unit box of dimension `n`.
pub fn hypervolume<G: AsRef<[f64]> + Sync>(elites: &[G], n: usize) -> Result<Hypervolume> {
    if elites.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    check_lengths(elites, n)?;
    let m = elites.len() as f64;
    let diagonal = (n as f64).sqrt();
    let (nearest, pair_sum) = pairwise_pass(elites);
    let spread = (elites.len() >= 2).then(|| nearest.iter().sum::<f64>() / (m * diagonal));
    let similarity = 1.0 - 2.0 * pair_sum / (m * m * diagonal);
    Ok(Hypervolume { spread, similarity })
}

/// Mean nearest-neighbour distance normalized by the box diagonal.
pub fn spread<G: AsRef<[f64]> + Sync>(elites: &[G], n: usize) -> Result<f64> {
    if elites.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: elites.len(),
        });
    }
    Ok(hypervolume(elites, n)?.spread.expect("two or more elites"))
}

/// One minus the mean pairwise distance (over all ordered pairs, including
/// each point with itself) normalized by the box diagonal.
pub fn similarity<G: AsRef<[f64]> + Sync>(elites: &[G], n: usize) -> Result<f64> {
    Ok(hypervolume(elites, n)?.similarity)
}
