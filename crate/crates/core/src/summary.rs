//! Distribution-preserving summaries: per-cluster representative counts
//! proportional to cluster size, filled with original samples.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::detect::score_all;
use crate::error::{Error, Result};
use crate::space::dist;
use crate::train::ClusterModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    /// Dataset positions of the members, ascending by row id.
    pub members: Vec<usize>,
    pub member_row_ids: Vec<usize>,
    pub per_cluster_counts: BTreeMap<usize, usize>,
    pub target_size: usize,
}

impl Summary {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub(crate) fn from_positions(
        dataset: &Dataset,
        mut members: Vec<usize>,
        per_cluster_counts: BTreeMap<usize, usize>,
        target_size: usize,
    ) -> Self {
        let ids = dataset.row_ids();
        members.sort_by_key(|&p| ids[p]);
        let member_row_ids = members.iter().map(|&p| ids[p]).collect();
        Summary {
            members,
            member_row_ids,
            per_cluster_counts,
            target_size,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SelectionMode {
    /// Evenly spaced ranks of centroid distance, from the medoid to the most
    /// peripheral member.
    Stratified,
    /// Uniform within each cluster.
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub selection: SelectionMode,
    /// Number of highest-scoring samples forced into their clusters' picks.
    pub force_top_scored: usize,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            selection: SelectionMode::Stratified,
            force_top_scored: 0,
        }
    }
}

/// Largest-remainder apportionment of `s` seats proportional to `sizes`.
///
/// Equal remainders go to the larger cluster, then the lower id.
pub fn allocate_counts(sizes: &[usize], s: usize) -> Result<Vec<usize>> {
    let n: usize = sizes.iter().sum();
    if s < 1 {
        return Err(Error::InvalidConfig("summary size must be at least 1".into()));
    }
    if s > n {
        return Err(Error::TooMany {
            requested: s,
            available: n,
        });
    }
    let (s128, n128) = (s as u128, n as u128);
    let mut counts: Vec<usize> = sizes.iter().map(|&m| (s128 * m as u128 / n128) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = s128 * sizes[a] as u128 % n128;
        let rb = s128 * sizes[b] as u128 % n128;
        rb.cmp(&ra).then(sizes[b].cmp(&sizes[a])).then(a.cmp(&b))
    });
    for &k in order.iter().take(s - assigned) {
        counts[k] += 1;
    }
    Ok(counts)
}

/// Ranks `0, ..., m-1` picked for `n` representatives: evenly spaced,
/// always including the first and (for `n >= 2`) the last.
pub(crate) fn spaced_ranks(m: usize, n: usize) -> Vec<usize> {
    match n {
        0 => vec![],
        1 => vec![0],
        _ => (0..n).map(|i| i * (m - 1) / (n - 1)).collect(),
    }
}

/// Positions of cluster `k`'s members ordered by weighted distance to the
/// centroid, ties by position.
fn ranked_members(k: usize, model: &ClusterModel, dataset: &Dataset) -> Vec<usize> {
    let w = model.weights.column(k);
    let c = &model.centroids[k];
    let mut members: Vec<(f64, usize)> = model
        .members(k)
        .into_iter()
        .map(|i| (dist(dataset.row(i), c, w), i))
        .collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    members.into_iter().map(|(_, i)| i).collect()
}

/// Row ids of `count` stratified representatives of cluster `k`.
pub fn select_representatives(k: usize, count: usize, model: &ClusterModel, dataset: &Dataset) -> Result<Vec<usize>> {
    let ranked = ranked_members(k, model, dataset);
    if count > ranked.len() {
        return Err(Error::TooMany {
            requested: count,
            available: ranked.len(),
        });
    }
    Ok(spaced_ranks(ranked.len(), count)
        .into_iter()
        .map(|r| dataset.row_ids()[ranked[r]])
        .collect())
}

pub fn summarize(model: &ClusterModel, dataset: &Dataset, s: usize) -> Result<Summary> {
    summarize_with(model, dataset, s, &SummaryOptions::default())
}

pub fn summarize_with(model: &ClusterModel, dataset: &Dataset, s: usize, options: &SummaryOptions) -> Result<Summary> {
    if model.assignments.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            found: model.assignments.len(),
        });
    }
    let counts = allocate_counts(&model.cluster_sizes(), s)?;

    let mut forced: Vec<Vec<usize>> = vec![Vec::new(); model.k()];
    if options.force_top_scored > 0 {
        let mut scored = score_all(model, dataset);
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.row_id.cmp(&b.row_id)));
        for s in scored.iter().take(options.force_top_scored) {
            forced[s.cluster].push(s.position);
        }
    }

    let mut rng = match options.selection {
        SelectionMode::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SelectionMode::Stratified => None,
    };
    let mut members = Vec::with_capacity(s);
    let mut per_cluster = BTreeMap::new();
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        per_cluster.insert(k, count);
        let take_forced = forced[k].len().min(count);
        let chosen_forced = &forced[k][..take_forced];
        members.extend_from_slice(chosen_forced);
        let rest: Vec<usize> = ranked_members(k, model, dataset)
            .into_iter()
            .filter(|p| !chosen_forced.contains(p))
            .collect();
        let need = count - take_forced;
        match rng.as_mut() {
            Some(rng) => {
                let picks = rand::seq::index::sample(rng, rest.len(), need);
                members.extend(picks.into_iter().map(|r| rest[r]));
            }
            None => members.extend(spaced_ranks(rest.len(), need).into_iter().map(|r| rest[r])),
        }
    }
    Ok(Summary::from_positions(dataset, members, per_cluster, s))
}
