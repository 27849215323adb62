use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Minimum size of each sample accepted by [`mann_whitney_u`].
pub const MWU_MIN_SAMPLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// Rank-sum statistic of the first sample.
    pub u: f64,
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Mann-Whitney U test with midranks for ties, tie-corrected variance and
/// a continuity-corrected normal approximation.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    for s in [a, b] {
        if s.len() < MWU_MIN_SAMPLE {
            return Err(Error::InsufficientData {
                needed: MWU_MIN_SAMPLE,
                got: s.len(),
            });
        }
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Contract("samples must not contain NaN".into()));
    }

    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let total = pooled.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i + 1;
        while j < total && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let midrank = (i + j + 1) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }

    let u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mean = n1 * n2 / 2.0;
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        // Every observation tied.
        return Ok(MannWhitney {
            u,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let p_value = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney { u, z, p_value })
}

/// Quantile of an ascending-sorted slice by linear interpolation between
/// order statistics (position `(len - 1) * q`).
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}
