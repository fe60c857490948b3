//! Finite-difference, brute-force and reference-implementation checks.

mod common;

use common::{instance, sq};
use insident::kmeans::{assign_clusters, lloyd};
use insident::space::{neighbor_pairs, objective, objective_with_pairs, UniqueRows, WeightMatrix};
use insident::synth::{self, SynthConfig};
use insident::train::{grad_c, grad_w};
use insident::{sigmoid, sigmoid_derivative, train, CentroidUpdate, LabelMode, TrainConfig};

const H: f64 = 1e-5;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-9
}

/// Independent objective: exhaustive neighbour scan written from the
/// definition, no shared helpers.
fn brute_objective(
    rows: &[Vec<f64>],
    labels: &[usize],
    assign: &[usize],
    centroids: &[Vec<f64>],
    w: &WeightMatrix,
    beta: f64,
) -> f64 {
    let n = rows.len();
    let mut km = 0.0;
    let mut nn = 0.0;
    for i in 0..n {
        let k = assign[i];
        let wk = w.column(k);
        km += sq(&rows[i], &centroids[k], wk);
        let nearest = |pred: &dyn Fn(usize) -> bool| -> Option<f64> {
            let mut best: Option<f64> = None;
            for j in 0..n {
                if j != i && pred(j) {
                    let d = sq(&rows[i], &rows[j], wk).sqrt();
                    if best.map_or(true, |b| d < b) {
                        best = Some(d);
                    }
                }
            }
            best
        };
        let in_k = |j: usize| assign[j] == k;
        let same = nearest(&|j| in_k(j) && labels[j] == labels[i]).or_else(|| nearest(&|j| labels[j] == labels[i]));
        let diff = nearest(&|j| in_k(j) && labels[j] != labels[i]).or_else(|| nearest(&|j| labels[j] != labels[i]));
        if let (Some(s), Some(d)) = (same, diff) {
            let r = s / (d + 1e-12);
            nn += 1.0 / (1.0 + (beta * (1.0 - r)).exp());
        }
    }
    km + nn / n as f64
}

#[test]
fn objective_matches_brute_force() {
    for seed in 0..25 {
        let n = 10 + (seed as usize * 7) % 41;
        let inst = instance(seed, n, 2 + seed as usize % 5, 1 + seed as usize % 3);
        let rows: Vec<Vec<f64>> = inst.dataset.rows().map(<[f64]>::to_vec).collect();
        let beta = 10.0;
        let got = objective(&inst.dataset, &inst.labels, &inst.assignments, &inst.centroids, &inst.weights, beta);
        let want = brute_objective(&rows, &inst.labels, &inst.assignments, &inst.centroids, &inst.weights, beta);
        assert!((got.total - want).abs() <= 1e-10, "seed {seed}: {} vs {want}", got.total);
    }
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..20 {
        let n = 30 + seed as usize;
        let d = 3 + seed as usize % 4;
        let k = 2 + seed as usize % 2;
        let inst = instance(100 + seed, n, d, k);
        let ds = &inst.dataset;
        let beta = 10.0;
        let pairs = neighbor_pairs(ds, &UniqueRows::new(ds), &inst.labels, &inst.assignments, &inst.centroids, &inst.weights);
        let f = |w: &WeightMatrix, c: &[Vec<f64>]| objective_with_pairs(ds, &inst.assignments, c, w, beta, &pairs).total;
        for kk in 0..k {
            let gw = grad_w(kk, ds, &inst.assignments, &inst.centroids, &inst.weights, beta, &pairs).unwrap();
            let gc = grad_c(kk, ds, &inst.assignments, &inst.centroids, &inst.weights).unwrap();
            for j in 0..d {
                let mut cols = inst.weights.columns().to_vec();
                cols[kk][j] += H;
                let up = f(&WeightMatrix::from_columns(cols.clone()).unwrap(), &inst.centroids);
                cols[kk][j] -= 2.0 * H;
                let down = f(&WeightMatrix::from_columns(cols).unwrap(), &inst.centroids);
                let fd = (up - down) / (2.0 * H);
                assert!(close(gw[j], fd, 1e-4), "seed {seed} W[{j},{kk}]: {} vs {fd}", gw[j]);

                let mut c = inst.centroids.clone();
                c[kk][j] += H;
                let up = f(&inst.weights, &c);
                c[kk][j] -= 2.0 * H;
                let down = f(&inst.weights, &c);
                let fd = (up - down) / (2.0 * H);
                assert!(close(gc[j], fd, 1e-5), "seed {seed} C[{kk},{j}]: {} vs {fd}", gc[j]);
            }
        }
    }
}

#[test]
fn sigmoid_derivative_matches_finite_differences() {
    for i in 0..200 {
        let z = -1.0 + 0.02 * i as f64;
        for beta in [0.5, 2.0, 10.0, 40.0] {
            let h = 1e-6;
            let fd = (sigmoid(z + h, beta) - sigmoid(z - h, beta)) / (2.0 * h);
            assert!((sigmoid_derivative(z, beta) - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "z {z} beta {beta}");
        }
    }
}

fn blobs(n: usize, dim: usize, blobs: usize, seed: u64) -> synth::SynthData {
    synth::generate(&SynthConfig {
        n,
        blobs,
        dim,
        anom_frac: 0.0,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn frozen_weights_and_exact_means_reduce_to_lloyd() {
    for seed in 0..5 {
        let data = blobs(400, 3, 4, seed);
        let ds = data.dataset();
        let mut cfg = TrainConfig::default().with_k(4).with_seed(seed);
        cfg.lr_w = 0.0;
        cfg.centroid_update = CentroidUpdate::Exact;
        cfg.tol = 0.0;
        cfg.max_iterations = 100;
        let model = train(&ds, &cfg).unwrap();
        let reference = lloyd(&ds, 4, seed, 100).unwrap();
        assert_eq!(model.assignments, reference.assignments, "seed {seed}");
        assert!(model.weights.columns().iter().flatten().all(|&w| w == 1.0));
    }
}

#[test]
fn gradient_centroid_step_reaches_the_mean() {
    let data = blobs(300, 2, 1, 4);
    let ds = data.dataset();
    let mut cfg = TrainConfig::default().with_k(1);
    cfg.lr_w = 0.0;
    cfg.tol = 0.0;
    cfg.max_iterations = 200;
    let model = train(&ds, &cfg).unwrap();
    for j in 0..2 {
        let mean = ds.rows().map(|r| r[j]).sum::<f64>() / ds.len() as f64;
        assert!((model.centroids[0][j] - mean).abs() < 1e-6);
    }
    let km: Vec<f64> = model.objective_trace.iter().map(|v| v.kmeans_term).collect();
    assert!(km[..5].windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn two_blobs_are_recovered() {
    let cfg = SynthConfig {
        n: 200,
        blobs: 2,
        dim: 2,
        anom_frac: 0.0,
        seed: 11,
        ..Default::default()
    };
    let data = synth::generate(&cfg).unwrap();
    let ds = data.dataset();
    let model = train(&ds, &TrainConfig::default().with_k(2).with_seed(3)).unwrap();
    let truth: Vec<usize> = data.blob.iter().map(|b| b.unwrap()).collect();
    let agree = model.assignments.iter().zip(&truth).filter(|(a, b)| a == b).count();
    let agree = agree.max(ds.len() - agree);
    assert!(agree as f64 >= 0.95 * ds.len() as f64, "{agree}");
}

#[test]
fn objective_descends_on_blob_suite() {
    for seed in 0..5 {
        let cfg = SynthConfig {
            n: 1500,
            blobs: 4,
            dim: 5,
            anom_frac: 0.02,
            seed,
            ..Default::default()
        };
        let ds = synth::generate(&cfg).unwrap().dataset();
        for mode in [LabelMode::Auto, LabelMode::Pseudo] {
            let mut tc = TrainConfig::default().with_k(6).with_seed(seed);
            tc.label_mode = mode;
            let trace = train(&ds, &tc).unwrap().objective_trace;
            assert!(trace.last().unwrap().total <= trace[0].total, "seed {seed} {mode:?}");
        }
    }
}

#[test]
fn assignments_are_argmin_under_the_model() {
    let ds = synth::generate(&SynthConfig { n: 800, seed: 2, ..Default::default() }).unwrap().dataset();
    let model = train(&ds, &TrainConfig::default().with_k(5)).unwrap();
    assert_eq!(model.assignments, assign_clusters(&ds, &model.centroids, &model.weights));
    for w in model.weights.columns() {
        assert!(w.iter().all(|&v| v > 0.0 && v.is_finite()));
    }
}
