//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

/// Plain O(m^2) spread: every ordered pair, distances from scratch.
pub fn brute_spread(points: &[Vec<f64>], n: usize) -> f64 {
    let m = points.len();
    let mut total = 0.0;
    for i in 0..m {
        let mut best = f64::INFINITY;
        for j in 0..m {
            if i != j {
                best = best.min(dist(&points[i], &points[j]));
            }
        }
        total += best;
    }
    total / (m as f64 * (n as f64).sqrt())
}

/// Plain O(m^2) similarity over all m^2 ordered pairs.
pub fn brute_similarity(points: &[Vec<f64>], n: usize) -> f64 {
    let m = points.len();
    let mut total = 0.0;
    for a in points {
        for b in points {
            total += dist(a, b);
        }
    }
    1.0 - total / ((m * m) as f64 * (n as f64).sqrt())
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Two-sided exact permutation p-value of the rank-sum statistic: the
/// share of all label assignments whose U is at least as far from its mean
/// as the observed one.
pub fn exact_mwu_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let n1 = a.len();
    let total = pooled.len();
    let mean = (n1 * (total - n1)) as f64 / 2.0;
    let u_of = |mask: u32| {
        let r: f64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        r - (n1 * (n1 + 1)) as f64 / 2.0
    };
    let observed = (u_of((1u32 << n1) - 1) - mean).abs();
    let (mut hits, mut count) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        count += 1;
        if (u_of(mask) - mean).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / count as f64
}

fn midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    (d, kolmogorov_q(lambda))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Sort-based median/quartile oracle using the same interpolation rule
/// stated for summaries: position (len - 1) * q.
pub fn sorted_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (v.len() - 1) as f64 * q;
    let lo = pos as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        v[lo]
    } else {
        v[lo] * (1.0 - frac) + v[lo + 1] * frac
    }
}

/// Sample mean vector and unbiased covariance matrix.
pub fn moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = samples[0].len();
    let count = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / count;
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for s in samples {
        for a in 0..n {
            for b in 0..n {
                cov[a][b] += (s[a] - mean[a]) * (s[b] - mean[b]) / (count - 1.0);
            }
        }
    }
    (mean, cov)
}
