mod common;

use elite_illum::engine::aggregate;
use elite_illum::io::{write_archive, write_progress};
use elite_illum::metrics::{mann_whitney_u, MetricsSnapshot};
use elite_illum::rng::evaluation_stream;
use elite_illum::variation::{iso_dd, iso_line_dd, line};
use elite_illum::{Archive, CentroidSet, CvtBuilder, Individual};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn uniform_points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

fn brute_nearest(points: &CentroidSet, q: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in points.iter().enumerate() {
        let d = common::dist(c, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[test]
fn kdtree_lookup_matches_brute_force_on_ten_thousand_centroids() {
    let mut builder = CvtBuilder::new(10_000, &[(0.0, 1.0), (0.0, 1.0)], 20_000, 3);
    builder.max_iterations = 3;
    let cs = builder.build().unwrap();
    assert_eq!(cs.len(), 10_000);
    for q in uniform_points(10_000, 2, 11) {
        let got = cs.nearest(&q).unwrap();
        let (want, d) = brute_nearest(&cs, &q);
        // Equal distances may pick a different index only on an exact tie.
        assert!(got == want || common::dist(cs.centroid(got), &q) == d, "query {q:?}");
    }
}

#[test]
fn kdtree_lookup_matches_brute_force_in_higher_dimensions() {
    let cs = CentroidSet::from_points(uniform_points(2_000, 6, 5), 0).unwrap();
    for q in uniform_points(10_000, 6, 6) {
        assert_eq!(cs.nearest(&q).unwrap(), brute_nearest(&cs, &q).0);
    }
}

#[test]
fn mwu_close_to_exact_permutation_without_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for shift in [0.0, 0.3, 0.8, 1.5] {
        for _ in 0..10 {
            let a: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 1.5 + shift).collect();
            let p = mann_whitney_u(&a, &b).unwrap().p_value;
            worst = worst.max((p - common::exact_mwu_p(&a, &b)).abs());
        }
    }
    assert!(worst < 0.02, "worst gap {worst}");
}

#[test]
fn mwu_full_separation() {
    let a: Vec<f64> = (0..8).map(f64::from).collect();
    let b: Vec<f64> = (10..18).map(f64::from).collect();
    let exact = common::exact_mwu_p(&a, &b);
    assert!((exact - 2.0 / 12870.0).abs() < 1e-12);
    let r = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(r.u, 0.0);
    assert!(r.p_value < 0.002);
}

#[test]
fn selection_is_uniform_over_occupied_niches() {
    let mut archive = Archive::new(100);
    let occupied: Vec<usize> = (0..100).step_by(5).collect();
    for &n in &occupied {
        // Fitness varies wildly; selection must ignore it.
        let fit = -(n as f64).powi(3);
        archive.restore(n, Individual::new(vec![0.5], fit, vec![0.5])).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = 200_000;
    let mut counts = vec![0u64; 100];
    for _ in 0..draws {
        counts[archive.select_niche(&mut rng).unwrap()] += 1;
    }
    let expected = draws as f64 / occupied.len() as f64;
    let mut chi2 = 0.0;
    for (n, &c) in counts.iter().enumerate() {
        if occupied.contains(&n) {
            chi2 += (c as f64 - expected).powi(2) / expected;
        } else {
            assert_eq!(c, 0, "empty niche {n} selected");
        }
    }
    let critical = ChiSquared::new(occupied.len() as f64 - 1.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn aggregate_quartiles_match_sorted_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let checkpoints = [100u64, 1000, 2000];
    let logs: Vec<Vec<MetricsSnapshot>> = (0..30)
        .map(|_| {
            checkpoints
                .iter()
                .map(|&e| MetricsSnapshot {
                    evaluations: e,
                    archive_size: rng.random_range(0..500),
                    mean_fitness: Some(-rng.random::<f64>() * 10.0),
                    max_fitness: Some(-rng.random::<f64>()),
                    spread: Some(rng.random()),
                    similarity: Some(rng.random()),
                })
                .collect()
        })
        .collect();
    let refs: Vec<&[MetricsSnapshot]> = logs.iter().map(Vec::as_slice).collect();
    let rows = aggregate(&refs);
    assert_eq!(rows.len(), checkpoints.len());
    for (c, row) in rows.iter().enumerate() {
        assert_eq!(row.evaluations, checkpoints[c]);
        assert_eq!(row.replicates, 30);
        let column = |f: &dyn Fn(&MetricsSnapshot) -> f64| -> Vec<f64> { logs.iter().map(|l| f(&l[c])).collect() };
        let cases = [
            (row.archive_size.unwrap(), column(&|s| s.archive_size as f64)),
            (row.mean_fitness.unwrap(), column(&|s| s.mean_fitness.unwrap())),
            (row.max_fitness.unwrap(), column(&|s| s.max_fitness.unwrap())),
            (row.spread.unwrap(), column(&|s| s.spread.unwrap())),
            (row.similarity.unwrap(), column(&|s| s.similarity.unwrap())),
        ];
        for (q, vals) in cases {
            assert!((q.q25 - common::sorted_quantile(&vals, 0.25)).abs() < 1e-12);
            assert!((q.median - common::sorted_quantile(&vals, 0.5)).abs() < 1e-12);
            assert!((q.q75 - common::sorted_quantile(&vals, 0.75)).abs() < 1e-12);
        }
    }
}

#[test]
fn output_csvs_parse_with_a_generic_reader() {
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::new(10);
    archive
        .restore(3, Individual::new(vec![0.1, 0.2, 0.3], -1.25, vec![0.4, 0.6]))
        .unwrap();
    archive
        .restore(7, Individual::new(vec![1.0 / 3.0, 0.0, 1.0], -0.5, vec![0.9, 0.1]))
        .unwrap();
    let path = dir.path().join("archive.csv");
    write_archive(&archive, 2, 3, &path).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["niche", "fitness", "b_1", "b_2", "g_1", "g_2", "g_3"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], vec![7.0, -0.5, 0.9, 0.1, 1.0 / 3.0, 0.0, 1.0]);

    let path = dir.path().join("progress.csv");
    let snaps = [
        MetricsSnapshot {
            evaluations: 100,
            archive_size: 40,
            mean_fitness: Some(-2.0),
            max_fitness: Some(-0.1),
            spread: None,
            similarity: None,
        },
        MetricsSnapshot {
            evaluations: 200,
            archive_size: 55,
            mean_fitness: Some(-1.5),
            max_fitness: Some(-0.05),
            spread: Some(0.2),
            similarity: Some(0.7),
        },
    ];
    write_progress(&snaps, &path).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let width = rdr.headers().unwrap().len();
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.len() == width));
    assert_eq!(&records[0][0], "100");
    assert_eq!(records[1][1].parse::<u64>().unwrap(), 55);
}

#[test]
fn iso_dd_covariance_scales_with_parent_distance() {
    let x_i = [0.2, 0.4, 0.6];
    let x_j = [0.5, 0.0, 0.6];
    let sigma = 0.05;
    let scale = sigma * common::dist(&x_i, &x_j);
    let draws = 100_000;
    let samples: Vec<Vec<f64>> = (0..draws)
        .map(|t| iso_dd(&x_i, &x_j, sigma, &mut evaluation_stream(1, t)).unwrap())
        .collect();
    let (mean, cov) = common::moments(&samples);
    let var = scale * scale;
    // Standard errors of a sample variance and a sample covariance.
    let se_var = var * (2.0 / draws as f64).sqrt();
    let se_cov = var / (draws as f64).sqrt();
    for a in 0..3 {
        assert!((mean[a] - x_i[a]).abs() < 4.0 * scale / (draws as f64).sqrt());
        for b in 0..3 {
            let (want, se) = if a == b { (var, se_var) } else { (0.0, se_cov) };
            assert!((cov[a][b] - want).abs() < 4.0 * se, "cov[{a}][{b}] = {}", cov[a][b]);
        }
    }
}

#[test]
fn line_steps_have_fixed_scale_along_the_parent_direction() {
    let x_i = [0.1, 0.1];
    let x_j = [0.9, 0.7];
    let sigma = 0.2;
    let unit: Vec<f64> = {
        let d = common::dist(&x_i, &x_j);
        vec![(x_j[0] - x_i[0]) / d, (x_j[1] - x_i[1]) / d]
    };
    let mut steps = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50_000 {
        let y = line(&x_i, &x_j, None, sigma, &mut rng).unwrap();
        let s = [y[0] - x_i[0], y[1] - x_i[1]];
        let along = s[0] * unit[0] + s[1] * unit[1];
        let across = s[0] * unit[1] - s[1] * unit[0];
        assert!(across.abs() < 1e-12);
        steps.push(along);
    }
    let n = steps.len() as f64;
    let var = steps.iter().map(|s| s * s).sum::<f64>() / n;
    assert!((var.sqrt() - sigma).abs() < 4.0 * sigma / (2.0 * n).sqrt());
}

#[test]
fn iso_line_dd_reduces_to_parent_with_zero_strengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x_i = [0.3, 0.7, 0.1];
    let y = iso_line_dd(&x_i, &[0.9, 0.2, 0.5], 0.0, 0.0, &mut rng).unwrap();
    assert_eq!(y, x_i);
}
