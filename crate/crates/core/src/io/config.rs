//! Flat `key=value` configuration files. Keys are the long CLI flag names
//! without dashes in front; `#` starts a comment line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use super::format_float;
use crate::cvt;
use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::tasks::{TaskKind, TaskSpec};
use crate::variation::{OperatorConfig, OperatorKind};

pub type Settings = BTreeMap<String, String>;

pub const SETTING_KEYS: [&str; 20] = [
    "task",
    "arm-dof",
    "schwefel-dim",
    "operator",
    "sigma1",
    "sigma2",
    "sigma",
    "alpha",
    "eta",
    "clamp",
    "evals",
    "k",
    "init",
    "batch",
    "seed",
    "checkpoint-every",
    "similarity-every",
    "threads",
    "cvt-samples",
    "cvt-seed",
];

pub fn read_settings(path: &Path) -> Result<Settings> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line_no, format!("expected key=value, got '{line}'")))?;
        let key = key.trim();
        if !SETTING_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "{}:{line_no}: unknown setting '{key}'",
                path.display()
            )));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn get<T: FromStr>(s: &Settings, key: &str) -> Result<Option<T>> {
    s.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
        })
        .transpose()
}

/// Builds a run configuration from settings; unset keys take their defaults.
/// `task` is required. Operator parameters default per operator.
pub fn run_config_from_settings(s: &Settings) -> Result<RunConfig> {
    let kind: TaskKind = match s.get("task") {
        Some(t) => t.parse()?,
        None => return Err(Error::Config("no task given (expected 'schwefel' or 'arm')".into())),
    };
    let task = match kind {
        TaskKind::Schwefel => TaskSpec::schwefel(get(s, "schwefel-dim")?.unwrap_or(100))?,
        TaskKind::Arm => TaskSpec::arm(get(s, "arm-dof")?.unwrap_or(12))?,
    };
    let op_kind: OperatorKind = match s.get("operator") {
        Some(o) => o.parse()?,
        None => OperatorKind::IsoLineDd,
    };
    let mut op = OperatorConfig::new(op_kind);
    if let Some(v) = get(s, "sigma1")? {
        op.sigma1 = v;
    }
    if let Some(v) = get(s, "sigma2")? {
        op.sigma2 = v;
    }
    if let Some(v) = get(s, "sigma")? {
        op.sigma = v;
    }
    if let Some(v) = get(s, "alpha")? {
        op.alpha = v;
    }
    if let Some(v) = get(s, "eta")? {
        op.eta = v;
    }
    if let Some(v) = get(s, "clamp")? {
        op.clamp = v;
    }

    let mut cfg = RunConfig::new(task, op);
    if let Some(k) = get(s, "k")? {
        cfg.k = k;
    }
    cfg.cvt_samples = get(s, "cvt-samples")?.unwrap_or_else(|| cvt::default_samples(cfg.k));
    if let Some(v) = get(s, "evals")? {
        cfg.budget = v;
    }
    if let Some(v) = get(s, "init")? {
        cfg.init_count = v;
    }
    if let Some(v) = get(s, "batch")? {
        cfg.batch_size = v;
    }
    if let Some(v) = get(s, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = get(s, "checkpoint-every")? {
        cfg.checkpoint_every = v;
    }
    if let Some(v) = get(s, "similarity-every")? {
        cfg.similarity_every = v;
    }
    match s.get("threads").map(String::as_str) {
        None | Some("auto") => cfg.threads = None,
        Some(_) => cfg.threads = get(s, "threads")?,
    }
    if let Some(v) = get(s, "cvt-seed")? {
        cfg.cvt_seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The full set of settings that reproduces `cfg`.
pub fn settings_from_run_config(cfg: &RunConfig) -> Settings {
    let mut s = Settings::new();
    let mut put = |k: &str, v: String| {
        s.insert(k.to_string(), v);
    };
    put("task", cfg.task.name().to_string());
    match cfg.task.kind {
        TaskKind::Schwefel => put("schwefel-dim", cfg.task.n.to_string()),
        TaskKind::Arm => put("arm-dof", cfg.task.n.to_string()),
    }
    let op = &cfg.operator;
    put("operator", op.kind.name().to_string());
    put("sigma1", format_float(op.sigma1));
    put("sigma2", format_float(op.sigma2));
    put("sigma", format_float(op.sigma));
    put("alpha", format_float(op.alpha));
    put("eta", format_float(op.eta));
    put("clamp", op.clamp.to_string());
    put("evals", cfg.budget.to_string());
    put("k", cfg.k.to_string());
    put("init", cfg.init_count.to_string());
    put("batch", cfg.batch_size.to_string());
    put("seed", cfg.seed.to_string());
    put("checkpoint-every", cfg.checkpoint_every.to_string());
    put("similarity-every", cfg.similarity_every.to_string());
    put(
        "threads",
        cfg.threads.map_or_else(|| "auto".to_string(), |t| t.to_string()),
    );
    put("cvt-samples", cfg.cvt_samples.to_string());
    put("cvt-seed", cfg.cvt_seed.to_string());
    s
}

/// Writes the config echo: a timestamp comment, then keys in flag order.
pub fn write_run_config(cfg: &RunConfig, extra: &[(&str, String)], path: &Path) -> Result<()> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let settings = settings_from_run_config(cfg);
    let mut out = format!("# timestamp={stamp}\n");
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    for key in SETTING_KEYS {
        if let Some(v) = settings.get(key) {
            let _ = writeln!(out, "{key}={v}");
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
