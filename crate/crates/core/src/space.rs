//! The locally weighted feature space.
//!
//! Cluster `k` rescales every feature axis by its own weight, giving the
//! distance `d_k(x, y) = sqrt(sum_j w_jk^2 (x_j - y_j)^2)`. Training minimizes
//! the k-means distortion in these local metrics plus a sigmoid surrogate of
//! the 1-nearest-neighbour error: for each sample, the ratio of the distance
//! to its nearest same-class neighbour over the distance to its nearest
//! different-class neighbour is pushed below one.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Guard added to the denominator of the neighbour distance ratio.
pub const RATIO_EPS: f64 = 1e-12;

/// Per-cluster feature weights, one column of `dim` weights per cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn ones(dim: usize, clusters: usize) -> Self {
        WeightMatrix {
            dim,
            columns: vec![vec![1.0; dim]; clusters],
        }
    }

    /// Validates nonnegativity and that every column has a positive entry.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let dim = columns.first().map_or(0, Vec::len);
        for (k, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: col.len(),
                });
            }
            if col.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "weight column {k} has a negative or non-finite entry"
                )));
            }
            if !col.iter().any(|&w| w > 0.0) {
                return Err(Error::InvalidConfig(format!("weight column {k} is all zero")));
            }
        }
        Ok(WeightMatrix { dim, columns })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clusters(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub(crate) fn column_mut(&mut self, k: usize) -> &mut Vec<f64> {
        &mut self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

/// Squared weighted distance, no length checks.
#[inline]
pub(crate) fn dist_sq(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((a, b), wj) in x.iter().zip(y).zip(w) {
        let t = wj * (a - b);
        s += t * t;
    }
    s
}

#[inline]
pub(crate) fn dist(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    dist_sq(x, y, w).sqrt()
}

pub fn weighted_distance(x: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    for len in [y.len(), w.len()] {
        if len != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: len,
            });
        }
    }
    Ok(dist(x, y, w))
}

/// `1 / (1 + exp(beta (1 - z)))`, evaluated without overflow.
pub fn sigmoid(z: f64, beta: f64) -> f64 {
    let t = beta * (1.0 - z);
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `beta e^t / (1 + e^t)^2` with `t = beta (1 - z)`; symmetric in `t`, so it
/// is evaluated through `e^{-|t|}`.
pub fn sigmoid_derivative(z: f64, beta: f64) -> f64 {
    let e = (-(beta * (1.0 - z)).abs()).exp();
    beta * e / ((1.0 + e) * (1.0 + e))
}

/// Nearest same-class (`same_*`) and nearest different-class (`diff_*`)
/// neighbours of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborPair {
    pub same_idx: usize,
    pub diff_idx: usize,
    pub same_dist: f64,
    pub diff_dist: f64,
}

/// Ratio of the same-class over the different-class neighbour distance.
/// Below one means the sample is correctly classified by 1NN.
pub fn ratio_r(x: &[f64], same: &[f64], diff: &[f64], w: &[f64]) -> f64 {
    ratio_from_distances(dist(x, same, w), dist(x, diff, w))
}

#[inline]
pub(crate) fn ratio_from_distances(same_dist: f64, diff_dist: f64) -> f64 {
    same_dist / (diff_dist + RATIO_EPS)
}

#[inline]
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn scan_min(
    dataset: &Dataset,
    query: usize,
    w: &[f64],
    candidates: impl Iterator<Item = usize>,
    accept: impl Fn(usize) -> bool,
) -> Option<(f64, usize)> {
    let x = dataset.row(query);
    let mut best: Option<(f64, usize)> = None;
    for j in candidates {
        if j == query || !accept(j) {
            continue;
        }
        let cand = (dist(x, dataset.row(j), w), j);
        if best.map_or(true, |b| better(cand, b)) {
            best = Some(cand);
        }
    }
    best
}

/// Exhaustive neighbour-pair search for one sample.
///
/// Both searches run inside `cluster_members`; a search that finds no
/// candidate there falls back to the whole dataset. Ties go to the lowest
/// index. Returns `None` when either neighbour does not exist anywhere.
pub fn find_neighbor_pair(
    query_idx: usize,
    cluster_members: &[usize],
    dataset: &Dataset,
    labels: &[usize],
    w: &[f64],
) -> Option<NeighborPair> {
    let class = labels[query_idx];
    let all = 0..dataset.len();
    let same = scan_min(dataset, query_idx, w, cluster_members.iter().copied(), |j| labels[j] == class)
        .or_else(|| scan_min(dataset, query_idx, w, all.clone(), |j| labels[j] == class))?;
    let diff = scan_min(dataset, query_idx, w, cluster_members.iter().copied(), |j| labels[j] != class)
        .or_else(|| scan_min(dataset, query_idx, w, all, |j| labels[j] != class))?;
    Some(NeighborPair {
        same_idx: same.1,
        diff_idx: diff.1,
        same_dist: same.0,
        diff_dist: diff.0,
    })
}

/// Identifies bit-identical feature vectors.
#[derive(Clone, Debug)]
pub struct UniqueRows {
    ids: Vec<u32>,
    count: usize,
}

impl UniqueRows {
    pub fn new(dataset: &Dataset) -> Self {
        let mut map: HashMap<Vec<u64>, u32> = HashMap::with_capacity(dataset.len());
        let ids = dataset
            .rows()
            .map(|row| {
                let key: Vec<u64> = row.iter().map(|v| canonical_bits(*v)).collect();
                let next = map.len() as u32;
                *map.entry(key).or_insert(next)
            })
            .collect();
        UniqueRows {
            ids,
            count: map.len(),
        }
    }

    pub fn id(&self, i: usize) -> u32 {
        self.ids[i]
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

#[inline]
fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 compare equal
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Samples sharing both a feature vector and a class.
#[derive(Clone, Copy, Debug)]
struct Group {
    key: f64,
    uid: u32,
    /// Lowest and second-lowest member index.
    first: usize,
    second: Option<usize>,
}

type ClassLists = HashMap<usize, Vec<Group>>;

fn build_groups(
    dataset: &Dataset,
    uniq: &UniqueRows,
    labels: &[usize],
    members: impl Iterator<Item = usize>,
    center: &[f64],
    w: &[f64],
) -> ClassLists {
    let mut index: HashMap<(u32, usize), usize> = HashMap::new();
    let mut groups: Vec<(usize, Group)> = Vec::new();
    for i in members {
        let gk = (uniq.id(i), labels[i]);
        match index.get(&gk) {
            Some(&g) => {
                let grp = &mut groups[g].1;
                // members arrive in ascending order
                if grp.second.is_none() {
                    grp.second = Some(i);
                }
            }
            None => {
                index.insert(gk, groups.len());
                groups.push((
                    labels[i],
                    Group {
                        key: dist(dataset.row(i), center, w),
                        uid: gk.0,
                        first: i,
                        second: None,
                    },
                ));
            }
        }
    }
    let mut lists: ClassLists = HashMap::new();
    for (class, g) in groups {
        lists.entry(class).or_default().push(g);
    }
    for list in lists.values_mut() {
        list.sort_by(|a, b| a.key.total_cmp(&b.key).then(a.first.cmp(&b.first)));
    }
    lists
}

#[derive(Clone, Copy)]
enum Skip {
    Nothing,
    /// Every sample sharing the query's feature vector.
    Uid(u32),
    /// Only the query sample itself.
    Index(usize),
}

/// Nearest group in a key-sorted list using the triangle-inequality bound
/// `d(x, y) >= |d(x, c) - d(y, c)|`.
fn search_sorted(
    list: &[Group],
    dataset: &Dataset,
    x: &[f64],
    x_key: f64,
    w: &[f64],
    skip: Skip,
    best: &mut Option<(f64, usize)>,
) {
    let slack = |b: f64| b + 1e-9 * (1.0 + b);
    let start = list.partition_point(|g| g.key < x_key);
    let visit = |g: &Group, best: &mut Option<(f64, usize)>| -> bool {
        if let Some(b) = *best {
            if (g.key - x_key).abs() > slack(b.0) {
                return false;
            }
        }
        let pick = match skip {
            Skip::Uid(u) if g.uid == u => None,
            Skip::Index(i) if g.first == i => g.second,
            _ => Some(g.first),
        };
        if let Some(j) = pick {
            let cand = (dist(x, dataset.row(j), w), j);
            if best.map_or(true, |b| better(cand, b)) {
                *best = Some(cand);
            }
        }
        true
    };
    let (mut up, mut down) = (start, start);
    let (mut up_open, mut down_open) = (true, true);
    while up_open || down_open {
        // alternate directions so the bound tightens from both sides
        if up_open {
            if up < list.len() {
                up_open = visit(&list[up], best);
                up += 1;
            } else {
                up_open = false;
            }
        }
        if down_open {
            if down > 0 {
                down -= 1;
                down_open = visit(&list[down], best);
            } else {
                down_open = false;
            }
        }
    }
}

/// Neighbour pairs of every sample, with `labels` as the class definition
/// (true labels or cluster pseudo-labels).
///
/// Produces exactly what [`find_neighbor_pair`] returns for each sample, but
/// searches over deduplicated feature vectors sorted by centroid distance.
pub fn neighbor_pairs(
    dataset: &Dataset,
    uniq: &UniqueRows,
    labels: &[usize],
    assignments: &[usize],
    centroids: &[Vec<f64>],
    weights: &WeightMatrix,
) -> Vec<Option<NeighborPair>> {
    let k_count = centroids.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k_count];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }

    let per_cluster: Vec<Vec<(usize, Option<NeighborPair>)>> = (0..k_count)
        .into_par_iter()
        .map(|k| {
            if members[k].is_empty() {
                return Vec::new();
            }
            let w = weights.column(k);
            let center = &centroids[k];
            let local = build_groups(dataset, uniq, labels, members[k].iter().copied(), center, w);
            let needs_global = local.len() < 2 || local.values().any(|l| l.len() == 1 && l[0].second.is_none());
            let global = needs_global.then(|| build_groups(dataset, uniq, labels, 0..dataset.len(), center, w));

            let mut queries: Vec<(usize, Group)> = local
                .iter()
                .flat_map(|(&class, list)| list.iter().map(move |g| (class, *g)))
                .collect();
            queries.sort_by_key(|(_, g)| g.first);

            let group_results: Vec<(usize, Group, Option<(f64, usize)>, Option<(f64, usize)>)> = queries
                .into_par_iter()
                .map(|(class, g)| {
                    let x = dataset.row(g.first);
                    let mut same_other = None;
                    let own_list = &local[&class];
                    search_sorted(own_list, dataset, x, g.key, w, Skip::Uid(g.uid), &mut same_other);
                    if same_other.is_none() && g.second.is_none() {
                        // the query is alone in its cluster, so copies elsewhere count
                        if let Some(list) = global.as_ref().and_then(|gl| gl.get(&class)) {
                            search_sorted(list, dataset, x, g.key, w, Skip::Index(g.first), &mut same_other);
                        }
                    }
                    let mut diff = None;
                    for (_, list) in local.iter().filter(|(c, _)| **c != class) {
                        search_sorted(list, dataset, x, g.key, w, Skip::Nothing, &mut diff);
                    }
                    if diff.is_none() {
                        if let Some(gl) = global.as_ref() {
                            for (_, list) in gl.iter().filter(|(c, _)| **c != class) {
                                search_sorted(list, dataset, x, g.key, w, Skip::Nothing, &mut diff);
                            }
                        }
                    }
                    (class, g, same_other, diff)
                })
                .collect();

            let mut out = Vec::with_capacity(members[k].len());
            let lookup: HashMap<(u32, usize), usize> = group_results
                .iter()
                .enumerate()
                .map(|(n, (class, g, _, _))| ((g.uid, *class), n))
                .collect();
            for &i in &members[k] {
                let (_, g, same_other, diff) = &group_results[lookup[&(uniq.id(i), labels[i])]];
                // a duplicate of the query inside its own group sits at distance 0
                let own = if i == g.first { g.second } else { Some(g.first) };
                let same = match (own.map(|j| (0.0, j)), *same_other) {
                    (Some(a), Some(b)) => Some(if better(a, b) { a } else { b }),
                    (a, b) => a.or(b),
                };
                let pair = match (same, diff) {
                    (Some(s), Some(d)) => Some(NeighborPair {
                        same_idx: s.1,
                        diff_idx: d.1,
                        same_dist: s.0,
                        diff_dist: d.0,
                    }),
                    _ => None,
                };
                out.push((i, pair));
            }
            out
        })
        .collect();

    let mut pairs = vec![None; dataset.len()];
    for cluster in per_cluster {
        for (i, p) in cluster {
            pairs[i] = p;
        }
    }
    pairs
}

/// Value of the training objective and its two terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub kmeans_term: f64,
    pub knn_term: f64,
    pub total: f64,
}

/// k-means distortion in the local metrics plus the mean sigmoid surrogate
/// of the 1NN error over samples that have a neighbour pair.
pub fn objective(
    dataset: &Dataset,
    labels: &[usize],
    assignments: &[usize],
    centroids: &[Vec<f64>],
    weights: &WeightMatrix,
    beta: f64,
) -> ObjectiveValue {
    let uniq = UniqueRows::new(dataset);
    let pairs = neighbor_pairs(dataset, &uniq, labels, assignments, centroids, weights);
    objective_with_pairs(dataset, assignments, centroids, weights, beta, &pairs)
}

/// Objective with neighbour identities held fixed; distances are recomputed
/// under the current weights.
pub fn objective_with_pairs(
    dataset: &Dataset,
    assignments: &[usize],
    centroids: &[Vec<f64>],
    weights: &WeightMatrix,
    beta: f64,
    pairs: &[Option<NeighborPair>],
) -> ObjectiveValue {
    let n = dataset.len();
    let terms: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = assignments[i];
            let w = weights.column(k);
            let x = dataset.row(i);
            let km = dist_sq(x, &centroids[k], w);
            let nn = pairs[i].map_or(0.0, |p| {
                sigmoid(ratio_r(x, dataset.row(p.same_idx), dataset.row(p.diff_idx), w), beta)
            });
            (km, nn)
        })
        .collect();
    let (mut kmeans_term, mut knn_sum) = (0.0, 0.0);
    for (km, nn) in terms {
        kmeans_term += km;
        knn_sum += nn;
    }
    let knn_term = if n == 0 { 0.0 } else { knn_sum / n as f64 };
    ObjectiveValue {
        kmeans_term,
        knn_term,
        total: kmeans_term + knn_term,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn distance_examples() {
        assert_eq!(weighted_distance(&[0.0, 0.0], &[3.0, 4.0], &[1.0, 1.0]).unwrap(), 5.0);
        assert_eq!(weighted_distance(&[0.3, 0.7], &[0.3, 0.7], &[5.0, 2.0]).unwrap(), 0.0);
        assert_eq!(weighted_distance(&[1.0, 0.0], &[0.0, 0.0], &[2.0, 1.0]).unwrap(), 2.0);
        assert!(weighted_distance(&[1.0], &[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(1.0, 10.0), 0.5);
        assert_eq!(sigmoid(1e6, 10.0), 1.0);
        assert_relative_eq!(sigmoid(0.0, 10.0), 4.5397868702434395e-5, max_relative = 1e-12);
        assert_eq!(sigmoid(-1e300, 10.0), 0.0);
        assert_eq!(sigmoid_derivative(1.0, 10.0), 2.5);
        assert_eq!(sigmoid_derivative(1.0, 2.0), 0.5);
        assert_eq!(sigmoid_derivative(1e300, 10.0), 0.0);
    }

    #[test]
    fn ratio_examples() {
        let w = [1.0];
        assert_eq!(ratio_r(&[0.0], &[1.0], &[2.0], &w), 1.0 / (2.0 + RATIO_EPS));
        assert_eq!(ratio_r(&[0.4], &[0.4], &[2.0], &w), 0.0);
        let r = ratio_r(&[0.0], &[1.0], &[0.0], &w);
        assert!(r.is_finite() && r > 1e11);
    }

    fn line(points: &[f64], labels: Vec<usize>) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        Dataset::from_rows(&rows, Some(labels)).unwrap()
    }

    #[test]
    fn pair_in_small_cluster() {
        let ds = line(&[0.0, 0.1, 0.9], vec![0, 0, 1]);
        let p = find_neighbor_pair(0, &[0, 1, 2], &ds, ds.labels().unwrap(), &[1.0]).unwrap();
        assert_eq!((p.same_idx, p.diff_idx), (1, 2));
        assert_relative_eq!(p.same_dist, 0.1);
        assert_relative_eq!(p.diff_dist, 0.9);
    }

    #[test]
    fn pure_cluster_uses_global_fallback() {
        // cluster {0, 1} is class-pure; the nearest other-class sample is 3, not 2
        let ds = line(&[0.0, 0.2, 0.9, 0.5], vec![0, 0, 1, 1]);
        let labels = ds.labels().unwrap();
        let p = find_neighbor_pair(0, &[0, 1], &ds, labels, &[1.0]).unwrap();
        assert_eq!(p.diff_idx, 3);
        let brute = (0..4)
            .filter(|&j| labels[j] != 0)
            .min_by(|&a, &b| ds.row(a)[0].abs().total_cmp(&ds.row(b)[0].abs()))
            .unwrap();
        assert_eq!(p.diff_idx, brute);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut pts = vec![5.0; 8];
        pts[0] = 0.0;
        pts[3] = 1.0;
        pts[7] = -1.0;
        let mut labels = vec![1; 8];
        labels[0] = 0;
        labels[3] = 0;
        labels[7] = 0;
        let ds = line(&pts, labels);
        let members: Vec<usize> = (0..8).collect();
        let p = find_neighbor_pair(0, &members, &ds, ds.labels().unwrap(), &[1.0]).unwrap();
        assert_eq!(p.same_idx, 3);
    }

    #[test]
    fn singleton_class_has_no_pair() {
        let ds = line(&[0.0, 0.5, 0.6], vec![1, 0, 0]);
        assert!(find_neighbor_pair(0, &[0, 1, 2], &ds, ds.labels().unwrap(), &[1.0]).is_none());
    }

    #[test]
    fn bulk_matches_exhaustive_with_duplicates() {
        let pts = [0.0, 0.0, 0.1, 0.1, 0.1, 0.5, 0.9, 0.9, 1.0, 0.95];
        let labels = vec![0, 0, 0, 1, 0, 1, 1, 1, 0, 1];
        let ds = line(&pts, labels.clone());
        let assignments = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let centroids = vec![vec![0.05], vec![0.85]];
        let weights = WeightMatrix::from_columns(vec![vec![1.0], vec![2.0]]).unwrap();
        let uniq = UniqueRows::new(&ds);
        let bulk = neighbor_pairs(&ds, &uniq, &labels, &assignments, &centroids, &weights);
        for i in 0..ds.len() {
            let members: Vec<usize> = (0..ds.len()).filter(|&j| assignments[j] == assignments[i]).collect();
            let want = find_neighbor_pair(i, &members, &ds, &labels, weights.column(assignments[i]));
            assert_eq!(bulk[i], want, "sample {i}");
        }
    }

    #[test]
    fn objective_degenerate_cases() {
        let ds = line(&[0.3], vec![0]);
        let w = WeightMatrix::ones(1, 1);
        let v = objective(&ds, &[0], &[0], &[vec![0.3]], &w, 10.0);
        assert_eq!((v.kmeans_term, v.knn_term, v.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn objective_with_unit_ratios() {
        // every sample sits at its centroid and R = 1 for each pair
        let ds = Dataset::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]],
            None,
        )
        .unwrap();
        let assignments = vec![0, 1, 0, 1];
        let centroids = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let w = WeightMatrix::ones(2, 2);
        let pairs = vec![
            Some(NeighborPair { same_idx: 1, diff_idx: 3, same_dist: 1.0, diff_dist: 1.0 }),
            Some(NeighborPair { same_idx: 0, diff_idx: 2, same_dist: 1.0, diff_dist: 1.0 }),
            None,
            None,
        ];
        let v = objective_with_pairs(&ds, &assignments, &centroids, &w, 10.0, &pairs);
        assert_eq!(v.kmeans_term, 0.0);
        assert_relative_eq!(v.knn_term, 0.5 * 2.0 / 4.0, max_relative = 1e-9);
    }

    #[test]
    fn weight_matrix_validation() {
        assert!(WeightMatrix::from_columns(vec![vec![0.0, 0.0]]).is_err());
        assert!(WeightMatrix::from_columns(vec![vec![-1.0, 1.0]]).is_err());
        assert!(WeightMatrix::from_columns(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_ok());
    }
}
