//! `elite-illum` command line: build tessellations, run single illuminations
//! or replicate campaigns, recompute metrics and compare campaigns.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand};
use elite_illum::engine::{self, RunConfig, RunHooks};
use elite_illum::io::{self, OutputLock, Settings};
use elite_illum::metrics::{archive_stats, hypervolume, mann_whitney_u, MetricsSnapshot};
use elite_illum::{CvtBuilder, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
/// The run was interrupted; partial results were written.
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug, Parser)]
#[command(name = "elite-illum", version, about = "CVT-MAP-Elites illumination runs and elite-hypervolume metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a centroidal Voronoi tessellation and store it in the cache
    Cvt(CvtArgs),
    /// One illumination run; writes archive.csv, progress.csv and config.txt
    Run(RunArgs),
    /// Replicate runs over several seeds plus per-checkpoint quartiles
    Campaign(CampaignArgs),
    /// Recompute spread, similarity and performance metrics of an archive CSV
    Metrics(MetricsArgs),
    /// Mann-Whitney U test between the final values of two campaigns
    Compare(CompareArgs),
}

/// Options shared by `cvt`, `run` and `campaign`. Every value can also come
/// from `--config`; flags win.
#[derive(Debug, Args, Default)]
struct ConfigArgs {
    /// key=value file whose keys are these flag names without dashes
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Benchmark task: schwefel or arm
    #[arg(long)]
    task: Option<String>,
    /// Joints of the arm task [default: 12]
    #[arg(long, value_name = "N")]
    arm_dof: Option<usize>,
    /// Dimension of the Schwefel task [default: 100]
    #[arg(long, value_name = "N")]
    schwefel_dim: Option<usize>,
    /// Number of niches [default: 10000]
    #[arg(long)]
    k: Option<usize>,
    /// Uniform samples for the tessellation [default: max(100000, 10k)]
    #[arg(long, value_name = "N")]
    cvt_samples: Option<usize>,
    /// Seed of the tessellation [default: 0]
    #[arg(long, value_name = "SEED")]
    cvt_seed: Option<u64>,
    /// Tessellation cache directory [default: $ELITE_ILLUM_CENTROID_CACHE, else <out>/centroids]
    #[arg(long, value_name = "DIR")]
    centroid_cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Variation operator: iso+linedd, linedd, line, iso, isodd, isosa, gc, sbx [default: iso+linedd]
    #[arg(long)]
    operator: Option<String>,
    /// Isotropic strength of iso+linedd [default: 0.01]
    #[arg(long)]
    sigma1: Option<f64>,
    /// Directional strength of iso+linedd and linedd [default: 0.2]
    #[arg(long)]
    sigma2: Option<f64>,
    /// Strength of line (0.2), iso (0.1), isodd (0.05, times parent distance) and isosa start (0.1)
    #[arg(long)]
    sigma: Option<f64>,
    /// Step scale of gc [default: 0.1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Distribution index of sbx [default: 10]
    #[arg(long)]
    eta: Option<f64>,
    /// Do not clamp offspring into the unit box before evaluation [default: clamp]
    #[arg(long)]
    no_clamp: bool,
    /// Evaluation budget, initial population included [default: 100000]
    #[arg(long)]
    evals: Option<u64>,
    /// Random genotypes evaluated first [default: 100]
    #[arg(long, value_name = "N")]
    init: Option<usize>,
    /// Offspring per batch; 1 is the serial algorithm [default: 100]
    #[arg(long, value_name = "N")]
    batch: Option<usize>,
    /// Run seed; a campaign uses seed, seed+1, ... [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluations between progress rows [default: 1000]
    #[arg(long, value_name = "N")]
    checkpoint_every: Option<u64>,
    /// Evaluations between spread/similarity computations, 0 disables [default: 10000]
    #[arg(long, value_name = "N")]
    similarity_every: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct CvtArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output directory; the cache lives in <out>/centroids unless overridden
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CampaignArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Number of replicates [default: 10]
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    replicates: Option<usize>,
    /// Explicit comma-separated replicate seeds
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    seeds: Option<Vec<u64>>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Archive CSV written by `run`
    #[arg(long, value_name = "FILE")]
    archive: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// First campaign directory or its finals.csv
    #[arg(long, value_name = "PATH")]
    a: PathBuf,
    /// Second campaign directory or its finals.csv
    #[arg(long, value_name = "PATH")]
    b: PathBuf,
    /// archive_size, mean_fitness, max_fitness, spread or similarity [default: archive_size]
    #[arg(long, default_value = "archive_size")]
    metric: String,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_io() { EXIT_IO } else { EXIT_CONFIG },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

/// Parses `args` (program name first), executes and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Cvt(a) => cmd_cvt(a),
        Command::Run(a) => cmd_run(a),
        Command::Campaign(a) => cmd_campaign(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn settings(common: &ConfigArgs, engine: Option<&EngineArgs>) -> CliResult<Settings> {
    let mut s = match &common.config {
        Some(path) => io::read_settings(path)?,
        None => Settings::new(),
    };
    let mut put = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            s.insert(key.to_string(), v);
        }
    };
    put("task", common.task.clone());
    put("arm-dof", common.arm_dof.map(|v| v.to_string()));
    put("schwefel-dim", common.schwefel_dim.map(|v| v.to_string()));
    put("k", common.k.map(|v| v.to_string()));
    put("cvt-samples", common.cvt_samples.map(|v| v.to_string()));
    put("cvt-seed", common.cvt_seed.map(|v| v.to_string()));
    if let Some(e) = engine {
        put("operator", e.operator.clone());
        put("sigma1", e.sigma1.map(|v| v.to_string()));
        put("sigma2", e.sigma2.map(|v| v.to_string()));
        put("sigma", e.sigma.map(|v| v.to_string()));
        put("alpha", e.alpha.map(|v| v.to_string()));
        put("eta", e.eta.map(|v| v.to_string()));
        put("clamp", e.no_clamp.then(|| "false".to_string()));
        put("evals", e.evals.map(|v| v.to_string()));
        put("init", e.init.map(|v| v.to_string()));
        put("batch", e.batch.map(|v| v.to_string()));
        put("seed", e.seed.map(|v| v.to_string()));
        put("checkpoint-every", e.checkpoint_every.map(|v| v.to_string()));
        put("similarity-every", e.similarity_every.map(|v| v.to_string()));
        put("threads", e.threads.map(|v| v.to_string()));
    }
    Ok(s)
}

fn centroids_for(
    cfg: &RunConfig,
    common: &ConfigArgs,
    out: &Path,
) -> CliResult<elite_illum::CentroidSet> {
    let dir = io::centroid_cache_dir(common.centroid_cache.as_deref(), out);
    let builder = CvtBuilder::new(cfg.k, &cfg.task.behavior_bounds, cfg.cvt_samples, cfg.cvt_seed);
    Ok(io::load_or_build_centroids(&dir, cfg.task.name(), &builder)?)
}

/// Process-wide interrupt flag, set by SIGINT/SIGTERM.
fn stop_flag() -> &'static AtomicBool {
    static FLAG: OnceLock<&'static AtomicBool> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag: &'static AtomicBool = Box::leak(Box::new(AtomicBool::new(false)));
        if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
            log::warn!("cannot install interrupt handler: {e}");
        }
        flag
    })
}

fn cmd_cvt(a: CvtArgs) -> CliResult<i32> {
    let cfg = io::run_config_from_settings(&settings(&a.common, None)?)?;
    let dir = io::centroid_cache_dir(a.common.centroid_cache.as_deref(), &a.out);
    let set = centroids_for(&cfg, &a.common, &a.out)?;
    let file = io::centroid_cache_file(&dir, cfg.task.name(), cfg.k, cfg.cvt_samples, cfg.cvt_seed);
    println!("{} centroids in {}", set.len(), file.display());
    Ok(EXIT_OK)
}

fn genotype_dim(cfg: &RunConfig) -> usize {
    cfg.task.n
}

fn write_run_outputs(result: &engine::RunResult, dir: &Path) -> CliResult<()> {
    let cfg = &result.config;
    io::write_archive(
        &result.archive,
        cfg.task.behavior_dim(),
        genotype_dim(cfg),
        &dir.join("archive.csv"),
    )?;
    io::write_progress(&result.snapshots, &dir.join("progress.csv"))?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> CliResult<i32> {
    let cfg = io::run_config_from_settings(&settings(&a.common, Some(&a.engine))?)?;
    let _lock = OutputLock::acquire(&a.out)?;
    let centroids = centroids_for(&cfg, &a.common, &a.out)?;
    let hooks = RunHooks {
        observer: None,
        stop: Some(stop_flag()),
    };
    let result = engine::run_with(&cfg, &centroids, hooks)?;
    write_run_outputs(&result, &a.out)?;
    io::write_run_config(&cfg, &[], &a.out.join("config.txt"))?;
    report(&result);
    if result.interrupted {
        eprintln!("interrupted; partial results written to {}", a.out.display());
        return Ok(EXIT_INTERRUPTED);
    }
    Ok(EXIT_OK)
}

fn report(result: &engine::RunResult) {
    if let Some(last) = result.snapshots.last() {
        println!(
            "seed {}: {} evaluations, archive size {}, mean fitness {}, max fitness {} ({:.1?})",
            result.config.seed,
            last.evaluations,
            last.archive_size,
            opt(last.mean_fitness),
            opt(last.max_fitness),
            result.duration
        );
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), io::format_float)
}

fn cmd_campaign(a: CampaignArgs) -> CliResult<i32> {
    let cfg = io::run_config_from_settings(&settings(&a.common, Some(&a.engine))?)?;
    let seeds: Vec<u64> = match &a.seeds {
        Some(list) => list.clone(),
        None => {
            let n = a.replicates.unwrap_or(10);
            (0..n as u64).map(|i| cfg.seed.wrapping_add(i)).collect()
        }
    };
    if seeds.is_empty() {
        return Err(config_error("a campaign needs at least one replicate"));
    }
    let _lock = OutputLock::acquire(&a.out)?;
    let centroids = centroids_for(&cfg, &a.common, &a.out)?;

    let mut logs: Vec<Vec<MetricsSnapshot>> = Vec::new();
    let mut finals = Vec::new();
    let mut interrupted = false;
    for &seed in &seeds {
        let replicate = RunConfig { seed, ..cfg.clone() };
        let hooks = RunHooks {
            observer: None,
            stop: Some(stop_flag()),
        };
        let result = engine::run_with(&replicate, &centroids, hooks)?;
        let dir = a.out.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::from(io_error(&dir, e)))?;
        write_run_outputs(&result, &dir)?;
        report(&result);
        if let Some(last) = result.snapshots.last() {
            finals.push((seed, *last));
        }
        logs.push(result.snapshots);
        if result.interrupted {
            interrupted = true;
            break;
        }
    }

    let views: Vec<&[MetricsSnapshot]> = logs.iter().map(Vec::as_slice).collect();
    let rows = engine::aggregate(&views);
    io::write_campaign_summary(&[(cfg.operator.kind.name(), &rows)], &a.out)?;
    io::write_finals(&finals, &a.out.join("finals.csv"))?;
    let seed_list = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    io::write_run_config(&cfg, &[("seeds", seed_list)], &a.out.join("config.txt"))?;
    if interrupted {
        eprintln!("interrupted; partial campaign written to {}", a.out.display());
        return Ok(EXIT_INTERRUPTED);
    }
    Ok(EXIT_OK)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn cmd_metrics(a: MetricsArgs) -> CliResult<i32> {
    let file = io::read_archive(&a.archive, None)?;
    let stats = archive_stats(&file.archive);
    println!("archive_size={}", stats.size);
    println!("mean_fitness={}", opt(stats.mean_fitness));
    println!("max_fitness={}", opt(stats.max_fitness));
    let genotypes = file.archive.genotypes();
    if genotypes.is_empty() {
        println!("spread=n/a");
        println!("similarity=n/a");
        return Ok(EXIT_OK);
    }
    let hv = hypervolume(&genotypes, file.genotype_dim)?;
    println!("spread={}", opt(hv.spread));
    println!("similarity={}", io::format_float(hv.similarity));
    Ok(EXIT_OK)
}

fn metric_of(name: &str) -> CliResult<fn(&MetricsSnapshot) -> Option<f64>> {
    Ok(match name {
        "archive_size" => |s| Some(s.archive_size as f64),
        "mean_fitness" => |s| s.mean_fitness,
        "max_fitness" => |s| s.max_fitness,
        "spread" => |s| s.spread,
        "similarity" => |s| s.similarity,
        other => {
            return Err(config_error(format!(
                "unknown metric '{other}' (valid: archive_size, mean_fitness, max_fitness, spread, similarity)"
            )))
        }
    })
}

fn finals_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("finals.csv")
    } else {
        p.to_path_buf()
    }
}

fn cmd_compare(a: CompareArgs) -> CliResult<i32> {
    let metric = metric_of(&a.metric)?;
    let load = |p: &Path| -> CliResult<Vec<f64>> {
        let rows = io::read_finals(&finals_path(p))?;
        Ok(rows.iter().filter_map(|(_, s)| metric(s)).collect())
    };
    let xa = load(&a.a)?;
    let xb = load(&a.b)?;
    let test = mann_whitney_u(&xa, &xb)?;
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        elite_illum::metrics::quantile(&v, 0.5)
    };
    println!("metric={}", a.metric);
    println!("median_a={}", opt(median(&xa)));
    println!("median_b={}", opt(median(&xb)));
    println!("u={}", io::format_float(test.u));
    println!("z={}", io::format_float(test.z));
    println!("p={}", io::format_float(test.p_value));
    Ok(EXIT_OK)
}
