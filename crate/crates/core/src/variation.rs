//! Variation operators.
//!
//! The directional operator (`Iso+LineDD`) perturbs a parent with a small
//! isotropic Gaussian plus a rank-1 Gaussian elongation along the
//! difference to a second elite. The other operators are the usual
//! baselines. Every sampling function here works on raw genotypes and does
//! not clamp; [`OperatorConfig::vary`] applies the configured bound
//! handling.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::archive::Archive;
use crate::error::{Error, Result};

/// Diagonal regularization added to the global covariance before factoring.
pub const GC_REGULARIZATION: f64 = 1e-10;

/// Parent distance under which `Line` treats the direction as undefined.
pub const LINE_DEGENERATE_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    IsoLineDd,
    LineDd,
    Line,
    Iso,
    IsoDd,
    IsoSa,
    Gc,
    Sbx,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 8] = [
        OperatorKind::IsoLineDd,
        OperatorKind::LineDd,
        OperatorKind::Line,
        OperatorKind::Iso,
        OperatorKind::IsoDd,
        OperatorKind::IsoSa,
        OperatorKind::Gc,
        OperatorKind::Sbx,
    ];

    /// Command-line spelling.
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::IsoLineDd => "iso+linedd",
            OperatorKind::LineDd => "linedd",
            OperatorKind::Line => "line",
            OperatorKind::Iso => "iso",
            OperatorKind::IsoDd => "isodd",
            OperatorKind::IsoSa => "isosa",
            OperatorKind::Gc => "gc",
            OperatorKind::Sbx => "sbx",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }

    /// Whether the operator reads the second elite.
    pub fn uses_mate(self) -> bool {
        matches!(
            self,
            OperatorKind::IsoLineDd
                | OperatorKind::LineDd
                | OperatorKind::Line
                | OperatorKind::IsoDd
                | OperatorKind::Sbx
        )
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == wanted)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown operator '{s}' (valid: {})",
                    Self::valid_names()
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    /// Isotropic scale of `Iso+LineDD`.
    pub sigma1: f64,
    /// Directional scale of `Iso+LineDD` and `LineDD`.
    pub sigma2: f64,
    /// Scale of `Line`, `Iso`, `IsoDD`, and the initial strength of `IsoSA`.
    pub sigma: f64,
    /// Covariance scaling of `GC`.
    pub alpha: f64,
    /// SBX distribution index.
    pub eta: f64,
    /// Clip offspring into the unit box.
    pub clamp: bool,
}

impl OperatorConfig {
    /// Operator with its reference parameter values.
    pub fn new(kind: OperatorKind) -> Self {
        let (sigma1, sigma) = match kind {
            OperatorKind::IsoLineDd => (0.01, 0.0),
            OperatorKind::Line => (0.0, 0.2),
            OperatorKind::Iso | OperatorKind::IsoSa => (0.0, 0.1),
            OperatorKind::IsoDd => (0.0, 0.05),
            _ => (0.0, 0.0),
        };
        OperatorConfig {
            kind,
            sigma1,
            sigma2: 0.2,
            sigma,
            alpha: 0.1,
            eta: 10.0,
            clamp: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, strict: bool| {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} = {v} is invalid for operator {}",
                    self.kind
                )))
            }
        };
        match self.kind {
            OperatorKind::IsoLineDd => {
                check("sigma1", self.sigma1, false)?;
                check("sigma2", self.sigma2, false)
            }
            OperatorKind::LineDd => check("sigma2", self.sigma2, false),
            OperatorKind::Line
            | OperatorKind::Iso
            | OperatorKind::IsoDd
            | OperatorKind::IsoSa => check("sigma", self.sigma, true),
            OperatorKind::Gc => check("alpha", self.alpha, true),
            OperatorKind::Sbx => check("eta", self.eta, false),
        }
    }

    /// Strength assigned to generation-0 individuals, if the operator keeps one.
    pub fn initial_sigma(&self) -> Option<f64> {
        (self.kind == OperatorKind::IsoSa).then_some(self.sigma)
    }

    /// Produces one offspring genotype, plus the new self-adapted strength for IsoSA.
    pub fn vary<R: Rng + ?Sized>(
        &self,
        parents: &Parents<'_>,
        global: Option<&GlobalCovariance>,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Option<f64>)> {
        let x_i = parents.parent;
        let x_j = parents.mate;
        let (mut child, sigma) = match self.kind {
            OperatorKind::IsoLineDd => (iso_line_dd(x_i, x_j, self.sigma1, self.sigma2, rng)?, None),
            OperatorKind::LineDd => (line_dd(x_i, x_j, self.sigma2, rng)?, None),
            OperatorKind::Line => (line(x_i, x_j, parents.alternate, self.sigma, rng)?, None),
            OperatorKind::Iso => (iso(x_i, self.sigma, rng), None),
            OperatorKind::IsoDd => (iso_dd(x_i, x_j, self.sigma, rng)?, None),
            OperatorKind::IsoSa => {
                let start = parents.parent_sigma.unwrap_or(self.sigma);
                let (child, s) = iso_sa(x_i, start, rng)?;
                (child, Some(s))
            }
            OperatorKind::Gc => {
                let g = global.ok_or_else(|| {
                    Error::Contract("GC variation requires a fitted global covariance".into())
                })?;
                (gc(x_i, g, self.alpha, rng)?, None)
            }
            OperatorKind::Sbx => (sbx(x_i, x_j, self.eta, rng)?, None),
        };
        if self.clamp {
            clamp_unit(&mut child);
        }
        Ok((child, sigma))
    }
}

/// Genotypes an operator may read.
#[derive(Debug, Clone, Copy)]
pub struct Parents<'a> {
    pub parent: &'a [f64],
    pub parent_sigma: Option<f64>,
    pub mate: &'a [f64],
    /// Replacement mate for `Line` when `mate` coincides with `parent`.
    pub alternate: Option<&'a [f64]>,
}

pub fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn same_length(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "parent lengths differ: {} vs {}",
            a.len(),
            b.len()
        )))
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `x_i + sigma1 N(0, I) + sigma2 (x_j - x_i) N(0, 1)`.
pub fn iso_line_dd<R: Rng + ?Sized>(
    x_i: &[f64],
    x_j: &[f64],
    sigma1: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    same_length(x_i, x_j)?;
    let along = sigma2 * normal(rng);
    Ok(x_i
        .iter()
        .zip(x_j)
        .map(|(a, b)| a + sigma1 * normal(rng) + along * (b - a))
        .collect())
}

/// Directional term only.
pub fn line_dd<R: Rng + ?Sized>(
    x_i: &[f64],
    x_j: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    same_length(x_i, x_j)?;
    let along = sigma2 * normal(rng);
    Ok(x_i
        .iter()
        .zip(x_j)
        .map(|(a, b)| a + along * (b - a))
        .collect())
}

/// Gaussian step of fixed scale along the unit direction towards `x_j`.
///
/// If the parents coincide, `alternate` is tried once in place of `x_j`;
/// when that is missing or also coincident the parent is returned unchanged.
pub fn line<R: Rng + ?Sized>(
    x_i: &[f64],
    x_j: &[f64],
    alternate: Option<&[f64]>,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    same_length(x_i, x_j)?;
    let mut mate = x_j;
    let mut norm = distance(x_i, mate);
    if norm < LINE_DEGENERATE_DISTANCE {
        match alternate {
            Some(alt) => {
                same_length(x_i, alt)?;
                mate = alt;
                norm = distance(x_i, mate);
                if norm < LINE_DEGENERATE_DISTANCE {
                    return Ok(x_i.to_vec());
                }
            }
            None => return Ok(x_i.to_vec()),
        }
    }
    let along = sigma * normal(rng) / norm;
    Ok(x_i
        .iter()
        .zip(mate)
        .map(|(a, b)| a + along * (b - a))
        .collect())
}

pub fn iso<R: Rng + ?Sized>(x_i: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    x_i.iter().map(|a| a + sigma * normal(rng)).collect()
}

/// Isotropic Gaussian whose scale is proportional to the parent distance.
pub fn iso_dd<R: Rng + ?Sized>(
    x_i: &[f64],
    x_j: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    same_length(x_i, x_j)?;
    Ok(iso(x_i, sigma * distance(x_i, x_j), rng))
}

/// Learning rate of the log-normal strength update.
pub fn iso_sa_tau(n: usize) -> f64 {
    1.0 / (2.0 * n as f64).sqrt()
}

/// Log-normal self-adaptation of a single strength, then an isotropic step
/// with the updated strength.
pub fn iso_sa<R: Rng + ?Sized>(x_i: &[f64], sigma_i: f64, rng: &mut R) -> Result<(Vec<f64>, f64)> {
    if !(sigma_i > 0.0) || !sigma_i.is_finite() {
        return Err(Error::Contract(format!(
            "IsoSA strength must be positive, got {sigma_i}"
        )));
    }
    let tau = iso_sa_tau(x_i.len());
    let sigma = sigma_i * (tau * normal(rng)).exp();
    Ok((iso(x_i, sigma, rng), sigma))
}

/// Gaussian fitted to all elite genotypes.
#[derive(Debug, Clone)]
pub struct GlobalCovariance {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GlobalCovariance {
    /// Population mean and covariance of `genotypes` (at least two).
    pub fn fit<G: AsRef<[f64]>>(genotypes: &[G]) -> Result<Self> {
        if genotypes.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: genotypes.len(),
            });
        }
        let n = genotypes[0].as_ref().len();
        let m = genotypes.len();
        if let Some(bad) = genotypes.iter().find(|g| g.as_ref().len() != n) {
            return Err(Error::Contract(format!(
                "genotype length {} differs from {n}",
                bad.as_ref().len()
            )));
        }
        let mut mean = vec![0.0; n];
        for g in genotypes {
            for (acc, v) in mean.iter_mut().zip(g.as_ref()) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= m as f64;
        }
        let centered = DMatrix::from_fn(m, n, |r, c| genotypes[r].as_ref()[c] - mean[c]);
        let mut cov = centered.transpose() * &centered;
        cov /= m as f64;
        // Enforce exact symmetry before factoring.
        for r in 0..n {
            for c in 0..r {
                let v = 0.5 * (cov[(r, c)] + cov[(c, r)]);
                cov[(r, c)] = v;
                cov[(c, r)] = v;
            }
        }
        Ok(Self::from_parts(mean, cov))
    }

    /// Zero-covariance model centred on one point.
    pub fn degenerate(mean: Vec<f64>) -> Self {
        let n = mean.len();
        Self::from_parts(mean, DMatrix::zeros(n, n))
    }

    /// Builds the model from an explicit mean and symmetric PSD covariance.
    pub fn from_parts(mean: Vec<f64>, cov: DMatrix<f64>) -> Self {
        let n = mean.len();
        let regularized = &cov + DMatrix::identity(n, n) * GC_REGULARIZATION;
        let factor = match regularized.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                // Rounding made the matrix slightly indefinite; fall back to
                // an eigen square root with clipped spectrum.
                let eig = regularized.symmetric_eigen();
                let roots = eig.eigenvalues.map(|l| l.max(GC_REGULARIZATION).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&roots)
            }
        };
        GlobalCovariance { mean, cov, factor }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Square-root factor `L` with `L Lᵀ = cov + εI`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits the global Gaussian to the archive's elites.
pub fn fit_global(archive: &Archive) -> Result<GlobalCovariance> {
    GlobalCovariance::fit(&archive.genotypes())
}

/// Parent-centric sample from the scaled global covariance.
pub fn gc<R: Rng + ?Sized>(
    x_i: &[f64],
    global: &GlobalCovariance,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if global.dim() != x_i.len() {
        return Err(Error::Contract(format!(
            "global covariance has dimension {}, parent has {}",
            global.dim(),
            x_i.len()
        )));
    }
    let z = DVector::from_fn(x_i.len(), |_, _| normal(rng));
    let step = &global.factor * z;
    Ok(x_i
        .iter()
        .zip(step.iter())
        .map(|(a, s)| a + alpha * s)
        .collect())
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// Single-offspring SBX given explicit per-coordinate draws: `None` keeps
/// the parent's value, `Some(u)` recombines with spread factor `beta(u)`.
pub fn sbx_with_draws(
    x_i: &[f64],
    x_j: &[f64],
    eta: f64,
    draws: impl IntoIterator<Item = Option<f64>>,
) -> Result<Vec<f64>> {
    same_length(x_i, x_j)?;
    Ok(x_i
        .iter()
        .zip(x_j)
        .zip(draws)
        .map(|((&a, &b), draw)| match draw {
            None => a,
            Some(u) => {
                let beta = sbx_beta(u, eta);
                0.5 * ((1.0 + beta) * a + (1.0 - beta) * b)
            }
        })
        .collect())
}

pub fn sbx<R: Rng + ?Sized>(x_i: &[f64], x_j: &[f64], eta: f64, rng: &mut R) -> Result<Vec<f64>> {
    same_length(x_i, x_j)?;
    let draws: Vec<Option<f64>> = (0..x_i.len())
        .map(|_| {
            let recombine: bool = rng.random();
            recombine.then(|| rng.random::<f64>())
        })
        .collect();
    sbx_with_draws(x_i, x_j, eta, draws)
}
