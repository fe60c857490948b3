//! Alternating optimization of cluster assignments, per-cluster feature
//! weights and centroids.
//!
//! Each iteration assigns samples in the current local metrics, refreshes
//! every sample's neighbour pair, takes a projected gradient step on each
//! weight column and then a gradient step on each centroid. Neighbour
//! identities are held fixed while differentiating.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kmeans::{assign_clusters, cluster_means, kmeanspp_seeds, reseed_empty};
use crate::space::{
    dist, neighbor_pairs, objective_with_pairs, ratio_from_distances, sigmoid_derivative, NeighborPair,
    ObjectiveValue, UniqueRows, WeightMatrix, RATIO_EPS,
};

const CHUNK: usize = 512;
const MODEL_FORMAT: &str = "insident-model";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidUpdate {
    /// Gradient step with rate `lr_c`.
    Gradient,
    /// Closed-form cluster mean.
    Exact,
}

/// Which class definition drives the neighbour pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// True labels when the dataset has them, cluster ids otherwise.
    Auto,
    /// Always cluster ids.
    Pseudo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub beta: f64,
    pub lr_w: f64,
    pub lr_c: f64,
    pub max_iterations: usize,
    pub tol: f64,
    pub seed: u64,
    pub centroid_update: CentroidUpdate,
    pub label_mode: LabelMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 10,
            beta: 10.0,
            lr_w: 0.01,
            lr_c: 0.05,
            max_iterations: 50,
            tol: 1e-5,
            seed: 0,
            centroid_update: CentroidUpdate::Gradient,
            label_mode: LabelMode::Auto,
        }
    }
}

impl TrainConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.lr_w >= 0.0 && self.lr_w.is_finite()) || !(self.lr_c > 0.0 && self.lr_c.is_finite()) {
            return bad("learning rates must be positive (lr_w may be 0 to freeze weights)");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        Ok(())
    }
}

/// A trained model: the learned local metrics and the clustering under them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub weights: WeightMatrix,
    pub assignments: Vec<usize>,
    pub objective_trace: Vec<ObjectiveValue>,
    pub converged: bool,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    k: usize,
    dim: usize,
    #[serde(flatten)]
    model: ClusterModel,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        members_of(&self.assignments, k)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            k: self.k(),
            dim: self.dim(),
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unexpected format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported version {}", file.version)));
        }
        let m = file.model;
        if m.centroids.len() != file.k || m.weights.clusters() != file.k || m.weights.dim() != file.dim {
            return Err(Error::Model("shape fields disagree with contents".into()));
        }
        if m.centroids.iter().any(|c| c.len() != file.dim) || m.assignments.iter().any(|&a| a >= file.k) {
            return Err(Error::Model("centroid width or assignment out of range".into()));
        }
        WeightMatrix::from_columns(m.weights.columns().to_vec())?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ClusterModel::from_json(&text)
    }
}

fn members_of(assignments: &[usize], k: usize) -> Vec<usize> {
    assignments
        .iter()
        .enumerate()
        .filter_map(|(i, &a)| (a == k).then_some(i))
        .collect()
}

/// k-means++ centroids, unit weights and the resulting assignment.
pub fn init_model(dataset: &Dataset, config: &TrainConfig) -> Result<ClusterModel> {
    config.validate()?;
    let seeds = kmeanspp_seeds(dataset, config.k, config.seed)?;
    let weights = WeightMatrix::ones(dataset.dim(), config.k);
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| dataset.row(i).to_vec()).collect();
    let mut assignments = assign_clusters(dataset, &centroids, &weights);
    reseed_empty(dataset, &mut assignments, &mut centroids, &weights);
    Ok(ClusterModel {
        centroids,
        weights,
        assignments,
        objective_trace: Vec::new(),
        converged: false,
        config: *config,
    })
}

/// Sums per-member vectors in fixed-size chunks so the result does not
/// depend on the number of worker threads.
fn chunked_sum(members: &[usize], dim: usize, f: impl Fn(usize, &mut [f64]) + Sync) -> Vec<f64> {
    let partials: Vec<Vec<f64>> = members
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; dim];
            for &i in chunk {
                f(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; dim];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Gradient of the ratio `d_same / (d_diff + eps)` with respect to the
/// weight column, accumulated into `out` scaled by `scale`.
fn add_ratio_grad(x: &[f64], same: &[f64], diff: &[f64], w: &[f64], scale: f64, out: &mut [f64]) {
    let ds = dist(x, same, w);
    let dd = dist(x, diff, w);
    let r = ratio_from_distances(ds, dd);
    let denom = dd + RATIO_EPS;
    for j in 0..w.len() {
        let a = (x[j] - same[j]) * (x[j] - same[j]);
        let b = (x[j] - diff[j]) * (x[j] - diff[j]);
        let d_same = if ds > 0.0 { w[j] * a / ds } else { 0.0 };
        let d_diff = if dd > 0.0 { w[j] * b / dd } else { 0.0 };
        out[j] += scale * (d_same / denom - r * d_diff / denom);
    }
}

fn grad_w_members(
    members: &[usize],
    k: usize,
    dataset: &Dataset,
    centroids: &[Vec<f64>],
    weights: &WeightMatrix,
    beta: f64,
    pairs: &[Option<NeighborPair>],
) -> Vec<f64> {
    let w = weights.column(k);
    let c = &centroids[k];
    let n = dataset.len() as f64;
    chunked_sum(members, dataset.dim(), |i, acc| {
        let x = dataset.row(i);
        for j in 0..w.len() {
            let t = x[j] - c[j];
            acc[j] += 2.0 * w[j] * t * t;
        }
        if let Some(p) = pairs[i] {
            let same = dataset.row(p.same_idx);
            let diff = dataset.row(p.diff_idx);
            let r = ratio_from_distances(dist(x, same, w), dist(x, diff, w));
            add_ratio_grad(x, same, diff, w, sigmoid_derivative(r, beta) / n, acc);
        }
    })
}

fn grad_c_members(members: &[usize], k: usize, dataset: &Dataset, centroids: &[Vec<f64>], weights: &WeightMatrix) -> Vec<f64> {
    let w = weights.column(k);
    let c = &centroids[k];
    chunked_sum(members, dataset.dim(), |i, acc| {
        let x = dataset.row(i);
        for j in 0..w.len() {
            acc[j] -= 2.0 * w[j] * w[j] * (x[j] - c[j]);
        }
    })
}

/// Gradient of the objective with respect to weight column `k`, neighbour
/// pairs held fixed.
#[allow(clippy::too_many_arguments)]
pub fn grad_w(
    k: usize,
    dataset: &Dataset,
    assignments: &[usize],
    centroids: &[Vec<f64>],
    weights: &WeightMatrix,
    beta: f64,
    pairs: &[Option<NeighborPair>],
) -> Result<Vec<f64>> {
    let members = members_of(assignments, k);
    if members.is_empty() {
        return Err(Error::EmptyCluster(k));
    }
    Ok(grad_w_members(&members, k, dataset, centroids, weights, beta, pairs))
}

/// Gradient of the objective with respect to centroid `k`.
pub fn grad_c(
    k: usize,
    dataset: &Dataset,
    assignments: &[usize],
    centroids: &[Vec<f64>],
    weights: &WeightMatrix,
) -> Result<Vec<f64>> {
    let members = members_of(assignments, k);
    if members.is_empty() {
        return Err(Error::EmptyCluster(k));
    }
    Ok(grad_c_members(&members, k, dataset, centroids, weights))
}

/// Largest allowed `|ln w_j|`.
const LOG_WEIGHT_BOUND: f64 = 4.605_170_185_988_092; // ln 100

/// One step on a weight column in log space, constrained to unit geometric
/// mean (`prod_j w_j = 1`).
///
/// The log-space gradient `w_j * grad_j` is projected onto the constraint
/// (mean removed) and divided by its mean magnitude, so `rate` is the
/// typical change of `ln w_j` per step whatever the data scale. Weights
/// stay in `[1/100, 100]`.
fn step_weights(w: &mut [f64], grad: &[f64], rate: f64) {
    let d = w.len() as f64;
    let g: Vec<f64> = w.iter().zip(grad).map(|(wj, gj)| wj * gj).collect();
    let mean = g.iter().sum::<f64>() / d;
    let scale = g.iter().map(|v| v.abs()).sum::<f64>() / d;
    if !(scale > 0.0) || !scale.is_finite() {
        return;
    }
    let mut u: Vec<f64> = w.iter().zip(&g).map(|(wj, gj)| wj.max(f64::MIN_POSITIVE).ln() - rate * (gj - mean) / scale).collect();
    // bounding breaks the zero mean slightly; one re-centering pass is enough in practice
    for _ in 0..2 {
        let centre = u.iter().sum::<f64>() / d;
        for v in u.iter_mut() {
            *v = (*v - centre).clamp(-LOG_WEIGHT_BOUND, LOG_WEIGHT_BOUND);
        }
    }
    for (wj, v) in w.iter_mut().zip(u) {
        *wj = v.exp();
    }
}

fn training_labels(dataset: &Dataset, assignments: &[usize], mode: LabelMode) -> Vec<usize> {
    match (mode, dataset.labels()) {
        (LabelMode::Auto, Some(l)) => l.to_vec(),
        _ => assignments.to_vec(),
    }
}

/// Runs the alternating optimization to convergence or `max_iterations`.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<ClusterModel> {
    let mut model = init_model(dataset, config)?;
    let uniq = UniqueRows::new(dataset);
    let k_count = config.k;
    let mut previous: Option<f64> = None;

    for _ in 0..config.max_iterations {
        let mut assignments = assign_clusters(dataset, &model.centroids, &model.weights);
        reseed_empty(dataset, &mut assignments, &mut model.centroids, &model.weights);
        model.assignments = assignments;

        let labels = training_labels(dataset, &model.assignments, config.label_mode);
        let pairs = neighbor_pairs(
            dataset,
            &uniq,
            &labels,
            &model.assignments,
            &model.centroids,
            &model.weights,
        );
        let members: Vec<Vec<usize>> = (0..k_count).map(|k| members_of(&model.assignments, k)).collect();

        // weights first, all from the same state
        let grads: Vec<Vec<f64>> = (0..k_count)
            .map(|k| grad_w_members(&members[k], k, dataset, &model.centroids, &model.weights, config.beta, &pairs))
            .collect();
        for (k, g) in grads.iter().enumerate() {
            if config.lr_w > 0.0 {
                step_weights(model.weights.column_mut(k), g, config.lr_w);
            }
        }

        match config.centroid_update {
            CentroidUpdate::Exact => cluster_means(dataset, &model.assignments, &mut model.centroids),
            CentroidUpdate::Gradient => {
                for k in 0..k_count {
                    let g = grad_c_members(&members[k], k, dataset, &model.centroids, &model.weights);
                    let w = model.weights.column(k);
                    let lipschitz = 2.0 * w.iter().fold(0.0f64, |m, v| m.max(v * v));
                    let step = config.lr_c.min(1.0 / lipschitz) / members[k].len() as f64;
                    for (c, gj) in model.centroids[k].iter_mut().zip(&g) {
                        *c -= step * gj;
                    }
                }
            }
        }

        let value = objective_with_pairs(
            dataset,
            &model.assignments,
            &model.centroids,
            &model.weights,
            config.beta,
            &pairs,
        );
        model.objective_trace.push(value);
        if let Some(prev) = previous {
            let change = (value.total - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if change < config.tol {
                model.converged = true;
                break;
            }
        }
        previous = Some(value.total);
    }

    let mut assignments = assign_clusters(dataset, &model.centroids, &model.weights);
    reseed_empty(dataset, &mut assignments, &mut model.centroids, &model.weights);
    model.assignments = assignments;
    Ok(model)
}
