//! Property suites over random inputs.

mod common;

use std::collections::HashSet;
use std::io::Write;

use insident::data::{Column, ColumnKind, PositiveRule};
use insident::eval::baseline_random_summary;
use insident::space::{find_neighbor_pair, neighbor_pairs, UniqueRows, WeightMatrix};
use insident::summary::allocate_counts;
use insident::{
    detect_top_n, load_dataset, score_all, summarize, summarize_with, weighted_distance, ClusterModel, Dataset,
    Schema, SelectionMode, SummaryOptions, TrainConfig,
};
use proptest::prelude::*;

fn vec_of(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weighted_distance_is_a_pseudometric(
        (x, y, z, w) in (1usize..8).prop_flat_map(|d| (vec_of(d), vec_of(d), vec_of(d), prop::collection::vec(0.0f64..3.0, d)))
    ) {
        let dxy = weighted_distance(&x, &y, &w).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy, weighted_distance(&y, &x, &w).unwrap());
        prop_assert_eq!(weighted_distance(&x, &x, &w).unwrap(), 0.0);
        let via = weighted_distance(&x, &z, &w).unwrap() + weighted_distance(&z, &y, &w).unwrap();
        prop_assert!(dxy <= via * (1.0 + 1e-12) + 1e-12);
        let ones = vec![1.0; x.len()];
        let euclid = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!((weighted_distance(&x, &y, &ones).unwrap() - euclid).abs() <= 1e-12 * (1.0 + euclid));
        let doubled: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        prop_assert!((weighted_distance(&x, &y, &doubled).unwrap() - 2.0 * dxy).abs() <= 1e-12 * (1.0 + dxy));
    }

    #[test]
    fn bulk_neighbour_search_equals_exhaustive(
        seed in 0u64..10_000,
        n in 2usize..40,
        d in 1usize..4,
        k in 1usize..4,
        grid in 1u32..4,
    ) {
        // coarse grid values create duplicates and distance ties
        let inst = common::instance(seed, n.max(k), d, k);
        let rows: Vec<Vec<f64>> = inst.dataset.rows()
            .map(|r| r.iter().map(|v| (v * grid as f64).round() / grid as f64).collect())
            .collect();
        let ds = Dataset::from_rows(&rows, None).unwrap();
        for labels in [inst.labels.clone(), inst.assignments.clone()] {
            let bulk = neighbor_pairs(&ds, &UniqueRows::new(&ds), &labels, &inst.assignments, &inst.centroids, &inst.weights);
            for i in 0..ds.len() {
                let members: Vec<usize> = (0..ds.len()).filter(|&j| inst.assignments[j] == inst.assignments[i]).collect();
                let brute = find_neighbor_pair(i, &members, &ds, &labels, inst.weights.column(inst.assignments[i]));
                prop_assert_eq!(bulk[i], brute, "sample {}", i);
            }
        }
    }

    #[test]
    fn apportionment_is_proportional(
        sizes in prop::collection::vec(0usize..500, 1..12),
        frac in 0.0f64..=1.0,
    ) {
        let n: usize = sizes.iter().sum();
        prop_assume!(n > 0);
        let s = ((frac * n as f64).round() as usize).clamp(1, n);
        let counts = allocate_counts(&sizes, s).unwrap();
        prop_assert_eq!(counts.iter().sum::<usize>(), s);
        for (c, m) in counts.iter().zip(&sizes) {
            prop_assert!(c <= m);
            let quota = s as f64 * *m as f64 / n as f64;
            prop_assert!((*c as f64 - quota).abs() < 1.0);
        }
    }
}

fn model_for(ds: &Dataset, seed: u64, k: usize) -> ClusterModel {
    let mut cfg = TrainConfig::default().with_k(k).with_seed(seed);
    cfg.max_iterations = 5;
    insident::train(ds, &cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn summaries_preserve_membership_and_proportions(
        seed in 0u64..1000,
        n in 5usize..80,
        k in 1usize..5,
        frac in 0.01f64..=1.0,
        random in any::<bool>(),
        forced in 0usize..4,
    ) {
        let inst = common::instance(seed, n.max(k), 3, k);
        let ds = &inst.dataset;
        let model = model_for(ds, seed, k);
        let s = ((frac * ds.len() as f64).ceil() as usize).clamp(1, ds.len());
        let opts = SummaryOptions {
            selection: if random { SelectionMode::Random { seed } } else { SelectionMode::Stratified },
            force_top_scored: forced,
        };
        let summary = summarize_with(&model, ds, s, &opts).unwrap();
        prop_assert_eq!(summary.len(), s);
        let unique: HashSet<usize> = summary.member_row_ids.iter().copied().collect();
        prop_assert_eq!(unique.len(), s);
        let sources: HashSet<Vec<u64>> = ds.rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        for &p in &summary.members {
            let bits: Vec<u64> = ds.row(p).iter().map(|v| v.to_bits()).collect();
            prop_assert!(sources.contains(&bits));
        }
        let sizes = model.cluster_sizes();
        for (c, &m) in sizes.iter().enumerate() {
            let got = summary.members.iter().filter(|&&p| model.assignments[p] == c).count();
            prop_assert_eq!(got, summary.per_cluster_counts.get(&c).copied().unwrap_or(0));
            prop_assert!((got as f64 - s as f64 * m as f64 / ds.len() as f64).abs() < 1.0);
        }
        prop_assert!(summary.member_row_ids.windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(summarize(&model, ds, ds.len()).unwrap().member_row_ids, ds.row_ids().to_vec());
    }

    #[test]
    fn top_n_is_nested_and_scores_are_permutation_invariant(seed in 0u64..1000, n in 4usize..60, a in 0usize..60, b in 0usize..60) {
        let inst = common::instance(seed, n, 3, 2);
        let ds = &inst.dataset;
        let model = model_for(ds, seed, 2);
        let scores = score_all(&model, ds);
        prop_assert!(scores.iter().all(|s| s.score.is_finite() && s.score >= 0.0));
        let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
        let small = detect_top_n(&scores, lo).unwrap();
        let large = detect_top_n(&scores, hi).unwrap();
        prop_assert_eq!(&large[..lo], &small[..]);

        // reverse the rows, keep the ids
        let order: Vec<usize> = (0..n).rev().collect();
        let reversed = ds.subset(&order);
        let mut rmodel = model.clone();
        rmodel.assignments = order.iter().map(|&i| model.assignments[i]).collect();
        let mut again: Vec<(usize, u64)> = score_all(&rmodel, &reversed).iter().map(|s| (s.row_id, s.score.to_bits())).collect();
        let mut first: Vec<(usize, u64)> = scores.iter().map(|s| (s.row_id, s.score.to_bits())).collect();
        again.sort_unstable();
        first.sort_unstable();
        prop_assert_eq!(again, first);
    }

    #[test]
    fn encoding_round_trip(
        cells in prop::collection::vec((-1e6f64..1e6, 0usize..4, -50i64..50), 1..40),
    ) {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        let cats = ["tcp", "udp", "icmp", "x,y"];
        writeln!(file, "a,proto,b,label").unwrap();
        for (i, (a, c, b)) in cells.iter().enumerate() {
            let proto = if cats[*c].contains(',') { format!("\"{}\"", cats[*c]) } else { cats[*c].to_string() };
            writeln!(file, "{a},{proto},{b},{}", if i % 5 == 0 { "bad" } else { "ok" }).unwrap();
        }
        file.flush().unwrap();
        let schema = Schema::new(vec![
            Column::new("a", ColumnKind::Numeric),
            Column::new("proto", ColumnKind::Categorical),
            Column::new("b", ColumnKind::Numeric),
            Column::new("label", ColumnKind::Ignore),
        ])
        .with_label(3, PositiveRule::Equals("bad".into()))
        .with_header(true);
        let (ds, enc) = load_dataset(file.path(), &schema).unwrap();
        prop_assert_eq!(ds.len(), cells.len());
        let seen: HashSet<usize> = cells.iter().map(|c| c.1).collect();
        prop_assert_eq!(ds.dim(), 2 + seen.len() + 1);
        prop_assert_eq!(enc.dim(), ds.dim());
        for (i, row) in ds.rows().enumerate() {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            let hot = &row[1..ds.dim() - 1];
            prop_assert_eq!(hot.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(row[ds.dim() - 2], 0.0);
            prop_assert_eq!(ds.labels().unwrap()[i], usize::from(i % 5 == 0));
        }
        // min-max is order preserving
        for i in 0..cells.len() {
            for j in 0..cells.len() {
                if cells[i].0 < cells[j].0 {
                    prop_assert!(ds.row(i)[0] <= ds.row(j)[0]);
                }
            }
        }
    }
}

#[test]
fn random_baseline_matches_hypergeometric_mean() {
    let n = 1000;
    let anomalies = 30;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i < anomalies)).collect();
    let ds = Dataset::from_rows(&vec![vec![0.0]; n], Some(labels)).unwrap();
    let s = 100;
    let trials = 2000;
    let mut total = 0usize;
    for seed in 0..trials {
        let summary = baseline_random_summary(&ds, s, seed).unwrap();
        total += summary.members.iter().filter(|&&p| p < anomalies).count();
    }
    let mean = total as f64 / trials as f64;
    let expected = s as f64 * anomalies as f64 / n as f64;
    // hypergeometric sd ~ 1.62, standard error of the mean ~ 0.036
    assert!((mean - expected).abs() < 0.15, "{mean} vs {expected}");
}

#[test]
fn weight_matrix_rejects_invalid_columns() {
    assert!(WeightMatrix::from_columns(vec![vec![1.0, -0.1]]).is_err());
    assert!(WeightMatrix::from_columns(vec![vec![0.0, 0.0]]).is_err());
    assert!(WeightMatrix::from_columns(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    assert!(WeightMatrix::from_columns(vec![vec![f64::NAN]]).is_err());
}
