//! Seeding, weighted assignment and the plain (unweighted) Lloyd iteration
//! used as a reference and as the centroid-summary baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::space::{dist_sq, WeightMatrix};

/// k-means++ seeding under the unweighted metric. Returns sample indices.
///
/// Once every remaining sample coincides with a chosen seed, the lowest
/// unchosen index is taken.
pub fn kmeanspp_seeds(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = dataset.len();
    if k == 0 {
        return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
    }
    if n < k {
        return Err(Error::TooMany {
            requested: k,
            available: n,
        });
    }
    let ones = vec![1.0; dataset.dim()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    let mut seeds = vec![first];
    chosen[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .map(|i| dist_sq(dataset.row(i), dataset.row(first), &ones))
        .collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &v) in d2.iter().enumerate() {
                if v <= 0.0 {
                    continue;
                }
                acc += v;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            (0..n).find(|&i| !chosen[i]).expect("n >= k")
        };
        chosen[next] = true;
        seeds.push(next);
        let c = dataset.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, v)| {
            let d = dist_sq(dataset.row(i), c, &ones);
            if d < *v {
                *v = d;
            }
        });
    }
    Ok(seeds)
}

/// Index of the centroid closest to `x` in that centroid's own metric;
/// ties go to the lowest cluster id.
pub(crate) fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>], weights: &WeightMatrix) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centroids.iter().enumerate() {
        let d = dist_sq(x, c, weights.column(k));
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Assigns every sample to `argmin_k d_k(x, c_k)`; ties go to the lowest id.
pub fn assign_clusters(dataset: &Dataset, centroids: &[Vec<f64>], weights: &WeightMatrix) -> Vec<usize> {
    (0..dataset.len())
        .into_par_iter()
        .map(|i| nearest_centroid(dataset.row(i), centroids, weights))
        .collect()
}

/// Moves the sample farthest from its own centroid into each empty cluster,
/// making it that cluster's centroid. Donor clusters keep at least one member.
pub(crate) fn reseed_empty(
    dataset: &Dataset,
    assignments: &mut [usize],
    centroids: &mut [Vec<f64>],
    weights: &WeightMatrix,
) -> usize {
    let k_count = centroids.len();
    let mut sizes = vec![0usize; k_count];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut moved = 0;
    for k in 0..k_count {
        if sizes[k] > 0 {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = dist_sq(dataset.row(i), &centroids[a], weights.column(a));
            if best.map_or(true, |b| d > b.0) {
                best = Some((d, i));
            }
        }
        let Some((_, i)) = best else { break };
        sizes[assignments[i]] -= 1;
        assignments[i] = k;
        sizes[k] = 1;
        centroids[k] = dataset.row(i).to_vec();
        moved += 1;
    }
    moved
}

pub(crate) fn cluster_means(dataset: &Dataset, assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let d = dataset.dim();
    let mut sums = vec![vec![0.0; d]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(dataset.row(i)) {
            *s += v;
        }
    }
    for (k, c) in centroids.iter_mut().enumerate() {
        if counts[k] > 0 {
            for (cj, s) in c.iter_mut().zip(&sums[k]) {
                *cj = s / counts[k] as f64;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd's algorithm in the unweighted metric from k-means++ seeds.
pub fn lloyd(dataset: &Dataset, k: usize, seed: u64, max_iterations: usize) -> Result<KMeansFit> {
    let seeds = kmeanspp_seeds(dataset, k, seed)?;
    let ones = WeightMatrix::ones(dataset.dim(), k);
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| dataset.row(i).to_vec()).collect();
    let mut assignments = assign_clusters(dataset, &centroids, &ones);
    reseed_empty(dataset, &mut assignments, &mut centroids, &ones);
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        cluster_means(dataset, &assignments, &mut centroids);
        let mut next = assign_clusters(dataset, &centroids, &ones);
        reseed_empty(dataset, &mut next, &mut centroids, &ones);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        iterations,
    })
}
