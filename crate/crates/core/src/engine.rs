//! The CVT-MAP-Elites loop and multi-replicate campaigns.
//!
//! Offspring are produced in batches: parents and mates for a whole batch
//! are selected against the archive as it stands at the start of the
//! batch, variation and evaluation run in parallel, and insertions are
//! applied serially in evaluation order. A batch size of one is the plain
//! serial algorithm. Each evaluation draws from its own counter-based
//! stream, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::archive::{Archive, Individual};
use crate::cvt::{self, CentroidSet};
use crate::error::{Error, Result};
use crate::metrics::{self, quantile, MetricsSnapshot};
use crate::rng::{coordinator_stream, evaluation_stream};
use crate::tasks::TaskSpec;
use crate::variation::{
    clamp_unit, distance, GlobalCovariance, OperatorConfig, OperatorKind, Parents,
    LINE_DEGENERATE_DISTANCE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskSpec,
    /// Number of niches.
    pub k: usize,
    pub operator: OperatorConfig,
    /// Total evaluations, initial population included.
    pub budget: u64,
    /// Random genotypes evaluated before the main loop.
    pub init_count: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
    /// Spread/similarity cadence; 0 disables them.
    pub similarity_every: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub cvt_samples: usize,
    pub cvt_seed: u64,
}

impl RunConfig {
    pub fn new(task: TaskSpec, operator: OperatorConfig) -> Self {
        let k = 10_000;
        RunConfig {
            task,
            k,
            operator,
            budget: 100_000,
            init_count: 100,
            batch_size: 100,
            seed: 1,
            checkpoint_every: 1_000,
            similarity_every: 10_000,
            threads: None,
            cvt_samples: cvt::default_samples(k),
            cvt_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.init_count == 0 {
            return fail("initial population must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.budget < self.init_count as u64 {
            return fail(format!(
                "budget {} is smaller than the initial population {}",
                self.budget, self.init_count
            ));
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint interval must be at least 1".into());
        }
        if self.threads == Some(0) {
            return fail("thread count must be at least 1".into());
        }
        if self.cvt_samples < self.k {
            return fail(format!(
                "CVT sample count {} is smaller than k = {}",
                self.cvt_samples, self.k
            ));
        }
        self.operator.validate()
    }

    /// Builds the tessellation this configuration asks for, without caching.
    pub fn build_centroids(&self) -> Result<CentroidSet> {
        cvt::build_centroids(
            self.k,
            &self.task.behavior_bounds,
            self.cvt_samples,
            self.cvt_seed,
        )
    }

    fn is_snapshot_point(&self, evals: u64) -> bool {
        evals >= self.init_count as u64
            && (evals == self.init_count as u64
                || evals == self.budget
                || evals.is_multiple_of(self.checkpoint_every)
                || self.is_hypervolume_point(evals))
    }

    fn is_hypervolume_point(&self, evals: u64) -> bool {
        self.similarity_every > 0 && (evals.is_multiple_of(self.similarity_every) || evals == self.budget)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub archive: Archive,
    pub snapshots: Vec<MetricsSnapshot>,
    pub duration: Duration,
    pub config: RunConfig,
    /// The run stopped early on request.
    pub interrupted: bool,
}

pub type Observer<'a> = &'a mut (dyn FnMut(&MetricsSnapshot, &Archive) + Send);

/// Optional hooks for [`run_with`].
#[derive(Default)]
pub struct RunHooks<'a> {
    /// Called with each snapshot and the archive it was taken from.
    pub observer: Option<Observer<'a>>,
    /// Checked between batches; when set the run stops and flushes a final snapshot.
    pub stop: Option<&'a AtomicBool>,
}

/// `count` random genotypes, evaluated. Uses evaluation streams starting at `first_index`.
pub fn init_population(
    count: usize,
    task: &TaskSpec,
    operator: &OperatorConfig,
    seed: u64,
    first_index: u64,
) -> Vec<Individual> {
    let sigma = operator.initial_sigma();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = evaluation_stream(seed, first_index + i as u64);
            let genotype: Vec<f64> = (0..task.n).map(|_| rng.random::<f64>()).collect();
            let eval = task.evaluate(&genotype);
            Individual::new(genotype, eval.fitness, eval.descriptor.to_vec()).with_sigma(sigma)
        })
        .collect()
}

pub fn run(cfg: &RunConfig, centroids: &CentroidSet) -> Result<RunResult> {
    run_with(cfg, centroids, RunHooks::default())
}

pub fn run_with(
    cfg: &RunConfig,
    centroids: &CentroidSet,
    hooks: RunHooks<'_>,
) -> Result<RunResult> {
    cfg.validate()?;
    if centroids.len() != cfg.k {
        return Err(Error::Config(format!(
            "tessellation has {} centroids but k = {}",
            centroids.len(),
            cfg.k
        )));
    }
    if centroids.dim() != cfg.task.behavior_dim() {
        return Err(Error::Config(format!(
            "tessellation dimension {} does not match behavior dimension {}",
            centroids.dim(),
            cfg.task.behavior_dim()
        )));
    }
    match cfg.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            pool.install(|| Runner::new(cfg, centroids, hooks).run())
        }
        None => Runner::new(cfg, centroids, hooks).run(),
    }
}

struct Job {
    parent: usize,
    mate: usize,
    alternate: Option<usize>,
}

struct Runner<'a, 'h> {
    cfg: &'a RunConfig,
    centroids: &'a CentroidSet,
    hooks: RunHooks<'h>,
    archive: Archive,
    snapshots: Vec<MetricsSnapshot>,
    evals: u64,
}

impl<'a, 'h> Runner<'a, 'h> {
    fn new(cfg: &'a RunConfig, centroids: &'a CentroidSet, hooks: RunHooks<'h>) -> Self {
        Runner {
            cfg,
            centroids,
            hooks,
            archive: Archive::new(cfg.k),
            snapshots: Vec::new(),
            evals: 0,
        }
    }

    fn run(mut self) -> Result<RunResult> {
        let started = Instant::now();
        let cfg = self.cfg;
        let mut interrupted = false;

        let mut done = 0usize;
        while done < cfg.init_count {
            let count = cfg.batch_size.min(cfg.init_count - done);
            let batch = init_population(count, &cfg.task, &cfg.operator, cfg.seed, self.evals);
            self.insert_batch(batch)?;
            done += count;
        }

        let mut selector = coordinator_stream(cfg.seed);
        while self.evals < cfg.budget {
            if self.stop_requested() {
                interrupted = true;
                break;
            }
            let count = (cfg.batch_size as u64).min(cfg.budget - self.evals) as usize;
            let jobs = self.select(count, &mut selector)?;
            let global = self.global_model();
            let offspring = breed(cfg, &self.archive, self.evals, &jobs, global.as_ref())?;
            self.insert_batch(offspring)?;
        }

        if interrupted && self.snapshots.last().map(|s| s.evaluations) != Some(self.evals) {
            self.snapshot(true);
        }

        Ok(RunResult {
            archive: self.archive,
            snapshots: self.snapshots,
            duration: started.elapsed(),
            config: cfg.clone(),
            interrupted,
        })
    }

    fn stop_requested(&self) -> bool {
        self.hooks
            .stop
            .is_some_and(|flag| flag.load(Ordering::Relaxed))
    }

    fn select(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<Job>> {
        let kind = self.cfg.operator.kind;
        let mut jobs = Vec::with_capacity(count);
        for _ in 0..count {
            let parent = self.archive.select_niche(rng)?;
            let mate = if kind.uses_mate() {
                self.archive.select_niche(rng)?
            } else {
                parent
            };
            let alternate = if kind == OperatorKind::Line
                && distance(self.genotype(parent), self.genotype(mate)) < LINE_DEGENERATE_DISTANCE
            {
                Some(self.archive.select_niche(rng)?)
            } else {
                None
            };
            jobs.push(Job {
                parent,
                mate,
                alternate,
            });
        }
        Ok(jobs)
    }

    fn genotype(&self, niche: usize) -> &[f64] {
        genotype_of(&self.archive, niche)
    }

    fn global_model(&self) -> Option<GlobalCovariance> {
        if self.cfg.operator.kind != OperatorKind::Gc {
            return None;
        }
        let genotypes = self.archive.genotypes();
        Some(match GlobalCovariance::fit(&genotypes) {
            Ok(g) => g,
            // A single elite: nothing to correlate, sample tightly around it.
            Err(_) => GlobalCovariance::degenerate(genotypes[0].to_vec()),
        })
    }

    fn insert_batch(&mut self, batch: Vec<Individual>) -> Result<()> {
        for ind in batch {
            self.archive.try_insert(ind, self.centroids)?;
            self.evals += 1;
            if self.cfg.is_snapshot_point(self.evals) {
                self.snapshot(false);
            }
        }
        Ok(())
    }

    fn snapshot(&mut self, force_hypervolume: bool) {
        let stats = metrics::archive_stats(&self.archive);
        let (spread, similarity) = if self.cfg.similarity_every > 0
            && (force_hypervolume || self.cfg.is_hypervolume_point(self.evals))
            && !self.archive.is_empty()
        {
            let hv = metrics::hypervolume(&self.archive.genotypes(), self.cfg.task.n)
                .expect("archive genotypes share the task dimension");
            (hv.spread, Some(hv.similarity))
        } else {
            (None, None)
        };
        let snap = MetricsSnapshot {
            evaluations: self.evals,
            archive_size: stats.size,
            mean_fitness: stats.mean_fitness,
            max_fitness: stats.max_fitness,
            spread,
            similarity,
        };
        if let Some(observer) = self.hooks.observer.as_mut() {
            observer(&snap, &self.archive);
        }
        self.snapshots.push(snap);
    }
}

fn genotype_of(archive: &Archive, niche: usize) -> &[f64] {
    &archive.get(niche).expect("selected niche is occupied").genotype
}

/// Variation and evaluation of one batch; pure with respect to `archive`.
fn breed(
    cfg: &RunConfig,
    archive: &Archive,
    first: u64,
    jobs: &[Job],
    global: Option<&GlobalCovariance>,
) -> Result<Vec<Individual>> {
    jobs.par_iter()
        .enumerate()
        .map(|(t, job)| {
            let parent = archive.get(job.parent).expect("occupied");
            let parents = Parents {
                parent: &parent.genotype,
                parent_sigma: parent.sigma,
                mate: genotype_of(archive, job.mate),
                alternate: job.alternate.map(|n| genotype_of(archive, n)),
            };
            let mut rng = evaluation_stream(cfg.seed, first + t as u64);
            let (mut genotype, sigma) = cfg.operator.vary(&parents, global, &mut rng)?;
            // The archive only holds unit-box genotypes, whatever `clamp` says.
            clamp_unit(&mut genotype);
            let eval = cfg.task.evaluate(&genotype);
            Ok(Individual::new(genotype, eval.fitness, eval.descriptor.to_vec()).with_sigma(sigma))
        })
        .collect()
}

/// Median and interquartile range of one metric at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Quartiles {
            q25: quantile(&sorted, 0.25)?,
            median: quantile(&sorted, 0.5)?,
            q75: quantile(&sorted, 0.75)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub evaluations: u64,
    /// Replicates that reported this checkpoint.
    pub replicates: usize,
    pub archive_size: Option<Quartiles>,
    pub mean_fitness: Option<Quartiles>,
    pub max_fitness: Option<Quartiles>,
    pub spread: Option<Quartiles>,
    pub similarity: Option<Quartiles>,
}

/// Per-checkpoint quartiles across replicate progress logs.
pub fn aggregate(runs: &[&[MetricsSnapshot]]) -> Vec<AggregateRow> {
    let mut by_evals: BTreeMap<u64, Vec<&MetricsSnapshot>> = BTreeMap::new();
    for run in runs {
        for snap in run.iter() {
            by_evals.entry(snap.evaluations).or_default().push(snap);
        }
    }
    by_evals
        .into_iter()
        .map(|(evaluations, snaps)| {
            let pick = |f: &dyn Fn(&MetricsSnapshot) -> Option<f64>| {
                let values: Vec<f64> = snaps.iter().filter_map(|s| f(s)).collect();
                Quartiles::of(&values)
            };
            AggregateRow {
                evaluations,
                replicates: snaps.len(),
                archive_size: pick(&|s| Some(s.archive_size as f64)),
                mean_fitness: pick(&|s| s.mean_fitness),
                max_fitness: pick(&|s| s.max_fitness),
                spread: pick(&|s| s.spread),
                similarity: pick(&|s| s.similarity),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<AggregateRow>,
}

impl Campaign {
    /// Final value of `metric` in every replicate that reports it.
    pub fn finals(&self, metric: impl Fn(&MetricsSnapshot) -> Option<f64>) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| r.snapshots.last().and_then(&metric))
            .collect()
    }

    /// Value of `metric` at `evals` in every replicate that reports it.
    pub fn at(&self, evals: u64, metric: impl Fn(&MetricsSnapshot) -> Option<f64>) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| {
                r.snapshots
                    .iter()
                    .find(|s| s.evaluations == evals)
                    .and_then(&metric)
            })
            .collect()
    }
}

/// Runs one replicate per seed (sequentially) and aggregates their progress.
pub fn run_campaign(cfg: &RunConfig, seeds: &[u64], centroids: &CentroidSet) -> Result<Campaign> {
    run_campaign_with(cfg, seeds, centroids, |_, _| RunHooks::default())
}

/// Like [`run_campaign`], with per-replicate hooks built from `(index, seed)`.
pub fn run_campaign_with<'h>(
    cfg: &RunConfig,
    seeds: &[u64],
    centroids: &CentroidSet,
    mut hooks: impl FnMut(usize, u64) -> RunHooks<'h>,
) -> Result<Campaign> {
    if seeds.is_empty() {
        return Err(Error::Config("a campaign needs at least one replicate".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in seeds {
        if !seen.insert(s) {
            log::warn!("seed {s} appears more than once; replicates will be identical");
        }
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let replicate = RunConfig {
            seed,
            ..cfg.clone()
        };
        let result = run_with(&replicate, centroids, hooks(i, seed))?;
        let stop = result.interrupted;
        runs.push(result);
        if stop {
            break;
        }
    }
    let logs: Vec<&[MetricsSnapshot]> = runs.iter().map(|r| r.snapshots.as_slice()).collect();
    let aggregate = aggregate(&logs);
    Ok(Campaign {
        seeds: seeds.to_vec(),
        runs,
        aggregate,
    })
}
