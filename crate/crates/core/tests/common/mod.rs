#![allow(dead_code)]

use insident::space::WeightMatrix;
use insident::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random small problem with every cluster nonempty and two classes.
pub struct Instance {
    pub dataset: Dataset,
    pub labels: Vec<usize>,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub weights: WeightMatrix,
}

pub fn instance(seed: u64, n: usize, d: usize, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0 || rng.gen_bool(0.2))).collect();
    let assignments: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    let centroids = (0..k).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    let weights = WeightMatrix::from_columns((0..k).map(|_| (0..d).map(|_| rng.gen_range(0.3..2.0)).collect()).collect())
        .unwrap();
    let dataset = Dataset::from_rows(&rows, Some(labels.clone())).unwrap();
    Instance {
        dataset,
        labels,
        assignments,
        centroids,
        weights,
    }
}

pub fn sq(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(y).zip(w).map(|((a, b), c)| c * c * (a - b) * (a - b)).sum()
}
