//! Centroidal Voronoi tessellation of the behavior space.
//!
//! Centroids are obtained with Lloyd's algorithm on uniform samples, seeded
//! with k-means++. Niche lookup goes through an exact k-d tree.

mod kdtree;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use kdtree::{squared_distance, KdTree};

pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Default number of uniform samples used for a `k`-niche tessellation.
pub fn default_samples(k: usize) -> usize {
    100_000.max(10 * k)
}

/// Immutable set of niche centroids with an exact nearest-centroid index.
#[derive(Debug, Clone)]
pub struct CentroidSet {
    dim: usize,
    coords: Vec<f64>,
    seed: u64,
    tree: KdTree,
}

impl PartialEq for CentroidSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.seed == other.seed && self.coords == other.coords
    }
}

impl CentroidSet {
    /// Wraps explicit centroid coordinates. Rejects empty sets, ragged rows
    /// and duplicated centroids.
    pub fn from_points(points: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Contract("centroid set must not be empty".into()))?;
        if dim == 0 {
            return Err(Error::Contract("centroid dimension must be positive".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Contract(format!(
                    "centroid {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Contract(format!("centroid {i} is not finite")));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim, seed)
    }

    fn from_flat(coords: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        let tree = KdTree::build(&coords, dim);
        let set = CentroidSet {
            dim,
            coords,
            seed,
            tree,
        };
        for i in 0..set.len() {
            let (j, d2) = set.tree.nearest(set.centroid(i));
            if j != i && d2 == 0.0 {
                return Err(Error::Contract(format!("centroids {j} and {i} coincide")));
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Index of the closest centroid, lowest index on ties.
    pub fn nearest(&self, descriptor: &[f64]) -> Result<usize> {
        if descriptor.len() != self.dim {
            return Err(Error::Contract(format!(
                "descriptor has dimension {}, centroids have {}",
                descriptor.len(),
                self.dim
            )));
        }
        Ok(self.tree.nearest(descriptor).0)
    }

    /// Linear-scan reference for [`CentroidSet::nearest`].
    pub fn nearest_linear(&self, descriptor: &[f64]) -> Result<usize> {
        if descriptor.len() != self.dim {
            return Err(Error::Contract(format!(
                "descriptor has dimension {}, centroids have {}",
                descriptor.len(),
                self.dim
            )));
        }
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.iter().enumerate() {
            let d2 = squared_distance(descriptor, c);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        Ok(best.0)
    }
}

/// Free-function form of [`CentroidSet::nearest`].
pub fn nearest_centroid(descriptor: &[f64], centroids: &CentroidSet) -> Result<usize> {
    centroids.nearest(descriptor)
}

/// Lloyd / k-means++ settings for one tessellation.
#[derive(Debug, Clone)]
pub struct CvtBuilder {
    pub k: usize,
    pub bounds: Vec<(f64, f64)>,
    pub samples: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
}

impl CvtBuilder {
    pub fn new(k: usize, bounds: &[(f64, f64)], samples: usize, seed: u64) -> Self {
        CvtBuilder {
            k,
            bounds: bounds.to_vec(),
            samples,
            seed,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            relative_tolerance: DEFAULT_RELATIVE_TOLERANCE,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::Config("behavior bounds must not be empty".into()));
        }
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "invalid bounds [{lo}, {hi}] in dimension {d}"
                )));
            }
        }
        if self.samples < self.k {
            return Err(Error::Config(format!(
                "sample count {} is smaller than k = {}",
                self.samples, self.k
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<CentroidSet> {
        self.run(None).map(|(set, _)| set)
    }

    /// Builds the tessellation and records, after seeding and after every
    /// Lloyd iteration, the mean distance from `probe` points to their
    /// nearest centroid.
    pub fn build_traced(&self, probe: &[Vec<f64>]) -> Result<(CentroidSet, Vec<f64>)> {
        self.run(Some(probe))
    }

    fn run(&self, probe: Option<&[Vec<f64>]>) -> Result<(CentroidSet, Vec<f64>)> {
        self.validate()?;
        let dim = self.bounds.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let mut samples = Vec::with_capacity(self.samples * dim);
        for _ in 0..self.samples {
            for &(lo, hi) in &self.bounds {
                samples.push(lo + rng.random::<f64>() * (hi - lo));
            }
        }

        let mut centroids = kmeans_plus_plus(&samples, dim, self.k, &mut rng);
        let mut trace = Vec::new();
        let mut record = |centroids: &[f64]| {
            if let Some(probe) = probe {
                trace.push(mean_probe_distance(centroids, dim, probe));
            }
        };
        record(&centroids);

        let diagonal = self
            .bounds
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
        let tolerance = self.relative_tolerance * diagonal;

        for _ in 0..self.max_iterations {
            let moved = lloyd_step(&samples, dim, &mut centroids);
            record(&centroids);
            if moved < tolerance {
                break;
            }
        }

        Ok((CentroidSet::from_flat(centroids, dim, self.seed)?, trace))
    }
}

/// Convenience wrapper around [`CvtBuilder`].
pub fn build_centroids(
    k: usize,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<CentroidSet> {
    CvtBuilder::new(k, bounds, samples, seed).build()
}

fn kmeans_plus_plus(samples: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let count = samples.len() / dim;
    let point = |i: usize| &samples[i * dim..(i + 1) * dim];

    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..count);
    centroids.extend_from_slice(point(first));

    let mut weights: Vec<f64> = (0..count)
        .map(|i| squared_distance(point(i), point(first)))
        .collect();

    for _ in 1..k {
        let total: f64 = weights.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` past the last partial sum.
            pick.unwrap_or_else(|| weights.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Every sample coincides with a centroid; nothing left to choose.
            break;
        };
        let c = point(chosen).to_vec();
        centroids.extend_from_slice(&c);
        weights
            .par_chunks_mut(4096)
            .enumerate()
            .for_each(|(chunk, ws)| {
                for (off, w) in ws.iter_mut().enumerate() {
                    let i = chunk * 4096 + off;
                    let d2 = squared_distance(point(i), &c);
                    if d2 < *w {
                        *w = d2;
                    }
                }
            });
    }
    centroids
}

/// One assignment + update pass. Returns the largest centroid displacement.
fn lloyd_step(samples: &[f64], dim: usize, centroids: &mut [f64]) -> f64 {
    let tree = KdTree::build(centroids, dim);
    let assignment: Vec<usize> = samples
        .par_chunks_exact(dim)
        .map(|s| tree.nearest(s).0)
        .collect();

    let k = centroids.len() / dim;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (s, &c) in samples.chunks_exact(dim).zip(&assignment) {
        counts[c] += 1;
        for (acc, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(s) {
            *acc += x;
        }
    }

    let mut moved: f64 = 0.0;
    for c in 0..k {
        // Empty cells keep their previous position.
        if counts[c] == 0 {
            continue;
        }
        let n = counts[c] as f64;
        let old = &mut centroids[c * dim..(c + 1) * dim];
        let mut shift = 0.0;
        for (o, s) in old.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
            let new = s / n;
            shift += (new - *o) * (new - *o);
            *o = new;
        }
        moved = moved.max(shift.sqrt());
    }
    moved
}

fn mean_probe_distance(centroids: &[f64], dim: usize, probe: &[Vec<f64>]) -> f64 {
    let tree = KdTree::build(centroids, dim);
    let total: f64 = probe.iter().map(|p| tree.nearest(p).1.sqrt()).sum();
    total / probe.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn single_centroid_sits_at_box_center() {
        let set = build_centroids(1, &[(0.0, 1.0), (0.0, 1.0)], 100_000, 3).unwrap();
        let c = set.centroid(0);
        assert!((c[0] - 0.5).abs() < 0.01 && (c[1] - 0.5).abs() < 0.01, "{c:?}");
    }

    #[test]
    fn two_centroids_on_unit_interval() {
        let set = build_centroids(2, &[(0.0, 1.0)], 100_000, 5).unwrap();
        let mut xs = vec![set.centroid(0)[0], set.centroid(1)[0]];
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 0.25).abs() < 0.02, "{xs:?}");
        assert!((xs[1] - 0.75).abs() < 0.02, "{xs:?}");
    }

    #[test]
    fn dense_lloyd_oracle_for_two_cells() {
        // Independent check of the analytic 1-D answer: plain Lloyd on a
        // regular grid of 10^4 points, started far from the solution.
        let grid: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let (mut a, mut b) = (0.1, 0.2);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let (left, right): (Vec<f64>, Vec<f64>) = grid.iter().partition(|&&x| x < mid);
            a = left.iter().sum::<f64>() / left.len() as f64;
            b = right.iter().sum::<f64>() / right.len() as f64;
        }
        assert!((a - 0.25).abs() < 1e-3 && (b - 0.75).abs() < 1e-3);
    }

    #[test]
    fn build_is_deterministic() {
        let bounds = [(-5.0, 5.0), (-5.0, 5.0)];
        let a = build_centroids(64, &bounds, 5_000, 9).unwrap();
        let b = build_centroids(64, &bounds, 5_000, 9).unwrap();
        let c = build_centroids(64, &bounds, 5_000, 10).unwrap();
        assert_eq!(a.coords, b.coords);
        assert_ne!(a.coords, c.coords);
    }

    #[test]
    fn centroids_are_distinct_and_in_bounds() {
        let bounds = [(-1.0, 1.0), (-1.0, 1.0)];
        let set = build_centroids(500, &bounds, 20_000, 1).unwrap();
        assert_eq!(set.len(), 500);
        for (i, c) in set.iter().enumerate() {
            for (x, (lo, hi)) in c.iter().zip(&bounds) {
                assert!(x >= lo && x <= hi);
            }
            for j in 0..i {
                assert!(squared_distance(c, set.centroid(j)) > 0.0);
            }
        }
    }

    #[test]
    fn probe_distance_decreases_over_iterations() {
        let bounds = [(0.0, 1.0), (0.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let probe: Vec<Vec<f64>> = (0..50_000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let mut builder = CvtBuilder::new(50, &bounds, 100_000, 4);
        builder.max_iterations = 30;
        let (_, trace) = builder.build_traced(&probe).unwrap();
        assert!(trace.len() >= 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "trace not monotone: {trace:?}");
        }
    }

    #[test]
    fn configuration_errors() {
        assert!(matches!(
            build_centroids(10, &[(1.0, 0.0)], 100, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_centroids(10, &[(0.0, 1.0)], 5, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_centroids(0, &[(0.0, 1.0)], 5, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn small_geometry_examples() {
        let set = CentroidSet::from_points(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 0).unwrap();
        assert_eq!(nearest_centroid(&[0.1, 0.2], &set).unwrap(), 0);
        assert!(matches!(set.nearest(&[0.1]), Err(Error::Contract(_))));

        let big = build_centroids(100, &[(0.0, 1.0), (0.0, 1.0)], 10_000, 2).unwrap();
        let c7 = big.centroid(7).to_vec();
        assert_eq!(big.nearest(&c7).unwrap(), 7);
    }

    #[test]
    fn duplicate_centroids_rejected() {
        let err = CentroidSet::from_points(vec![vec![0.5], vec![0.2], vec![0.5]], 0);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tree_agrees_with_linear_scan(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..200),
            queries in prop::collection::vec(prop::collection::vec(-0.2f64..1.2, 3), 1..50),
        ) {
            // Drop exact duplicates so the set is valid.
            let mut uniq: Vec<Vec<f64>> = Vec::new();
            for p in pts {
                if !uniq.contains(&p) {
                    uniq.push(p);
                }
            }
            let set = CentroidSet::from_points(uniq, 0).unwrap();
            for q in &queries {
                prop_assert_eq!(set.nearest(q).unwrap(), set.nearest_linear(q).unwrap());
            }
        }
    }
}
