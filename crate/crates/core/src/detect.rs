//! Anomaly scores in the learned space and top-N selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::space::dist;
use crate::train::ClusterModel;

const SCORE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub row_id: usize,
    pub position: usize,
    pub cluster: usize,
    pub score: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m == 0 {
        return 0.0;
    }
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Weighted centroid distance divided by the cluster's median member
/// distance, so scores are comparable across clusters. Dataset order.
pub fn score_all(model: &ClusterModel, dataset: &Dataset) -> Vec<ScoredSample> {
    let distances: Vec<f64> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let k = model.assignments[i];
            dist(dataset.row(i), &model.centroids[k], model.weights.column(k))
        })
        .collect();
    let mut per_cluster: Vec<Vec<f64>> = vec![Vec::new(); model.k()];
    for (i, &k) in model.assignments.iter().enumerate() {
        per_cluster[k].push(distances[i]);
    }
    let medians: Vec<f64> = per_cluster
        .into_iter()
        .map(|mut d| {
            d.sort_by(f64::total_cmp);
            median(&d)
        })
        .collect();
    distances
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let k = model.assignments[i];
            ScoredSample {
                row_id: dataset.row_ids()[i],
                position: i,
                cluster: k,
                score: d / (medians[k] + SCORE_EPS),
            }
        })
        .collect()
}

fn by_score_desc(scores: &[ScoredSample]) -> Vec<&ScoredSample> {
    let mut sorted: Vec<&ScoredSample> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.row_id.cmp(&b.row_id)));
    sorted
}

/// Row ids of the `n` highest scores, highest first; ties by lower row id.
pub fn detect_top_n(scores: &[ScoredSample], n: usize) -> Result<Vec<usize>> {
    if n > scores.len() {
        return Err(Error::TooMany {
            requested: n,
            available: scores.len(),
        });
    }
    Ok(by_score_desc(scores).into_iter().take(n).map(|s| s.row_id).collect())
}

/// Row ids scoring at or above the `quantile` (in `[0, 1]`, nearest rank)
/// of all scores, highest first.
pub fn detect_threshold(scores: &[ScoredSample], quantile: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidConfig(format!("quantile {quantile} outside [0, 1]")));
    }
    if scores.is_empty() {
        return Ok(vec![]);
    }
    let mut values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    values.sort_by(f64::total_cmp);
    let rank = ((quantile * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let cut = values[rank - 1];
    Ok(by_score_desc(scores)
        .into_iter()
        .take_while(|s| s.score >= cut)
        .map(|s| s.row_id)
        .collect())
}
