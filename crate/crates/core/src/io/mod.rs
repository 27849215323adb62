//! On-disk formats: centroid files, archive and progress CSVs, campaign
//! summaries, and flat `key=value` configuration files.
//!
//! Every float is written with 17 significant digits (`%.17g` style), which
//! round-trips any `f64` exactly. Files end lines with LF and carry no
//! timestamps, so equal inputs produce byte-identical files.

mod archive_csv;
mod centroids;
mod config;
mod progress;
mod summary;

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

pub use archive_csv::{read_archive, write_archive, ArchiveFile};
pub use centroids::{
    centroid_cache_dir, centroid_cache_file, load_or_build_centroids, read_centroids,
    write_centroids, CENTROID_CACHE_ENV,
};
pub use config::{
    read_settings, run_config_from_settings, settings_from_run_config, write_run_config,
    Settings, SETTING_KEYS,
};
pub use progress::{read_finals, read_progress, write_finals, write_progress};
pub use summary::{pareto_front, write_campaign_summary, ParetoEntry};

use crate::error::{Error, Result};

/// Formats `x` like C's `%.17g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{x:.*}", (16 - exp) as usize);
        strip_zeros(&fixed).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub(crate) fn parse_float(path: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid number '{field}'")))
}

pub(crate) fn parse_opt_float(path: &Path, line: u64, field: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_float(path, line, field).map(Some)
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub const FILE_NAME: &'static str = ".elite-illum.lock";

    /// Creates `dir` if needed and claims it. Fails if another writer holds it.
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(Self::FILE_NAME);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(OutputLock { path })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-100.0), "-100");
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(123456.789), "123456.789");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1e-4), "0.0001");
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(OutputLock::acquire(dir.path()).is_err());
        drop(lock);
        OutputLock::acquire(dir.path()).unwrap();
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let back: f64 = format_float(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
