//! Labeled synthetic traffic: Gaussian blobs of normal samples plus rare
//! point anomalies.
//!
//! Each blob has a center drawn uniformly from `[0.15, 0.85]^d` and its own
//! per-feature standard deviation drawn log-uniformly from
//! `[STD_MIN, STD_MAX]`, so blobs are tight along some axes and loose along
//! others. Anomalies are either uniform over `[0, 1]^d` or contextual: a
//! blob sample pushed `CONTEXT_SHIFT` standard deviations along that blob's
//! tightest feature, which keeps it inside the blob's overall extent.
//!
//! The anomaly count is `round(anom_frac * n)`; normal samples are split
//! across blobs as evenly as possible (earlier blobs get the remainder).
//! Rows are shuffled with the same seeded generator.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset, PositiveRule, Schema, ANOMALY, NORMAL};
use crate::error::{Error, Result};

pub const MAX_ANOMALY_FRACTION: f64 = 0.2;
pub const STD_MIN: f64 = 0.004;
pub const STD_MAX: f64 = 0.06;
pub const CONTEXT_SHIFT: f64 = 8.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    #[default]
    Uniform,
    Contextual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub blobs: usize,
    pub dim: usize,
    pub anom_frac: f64,
    pub seed: u64,
    #[serde(default)]
    pub anomalies: AnomalyKind,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 10_000,
            blobs: 5,
            dim: 8,
            anom_frac: 0.01,
            seed: 0,
            anomalies: AnomalyKind::Uniform,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.blobs == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("n, blobs and dim must be positive".into()));
        }
        if !(0.0..=MAX_ANOMALY_FRACTION).contains(&self.anom_frac) {
            return Err(Error::InvalidConfig(format!(
                "anomaly fraction {} outside [0, {MAX_ANOMALY_FRACTION}]",
                self.anom_frac
            )));
        }
        if self.normal_count() < self.blobs {
            return Err(Error::InvalidConfig("fewer normal samples than blobs".into()));
        }
        Ok(())
    }

    pub fn anomaly_count(&self) -> usize {
        (self.anom_frac * self.n as f64).round() as usize
    }

    pub fn normal_count(&self) -> usize {
        self.n - self.anomaly_count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Blob of each row; `None` for anomalies.
    pub blob: Vec<Option<usize>>,
    pub centers: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
}

impl SynthData {
    pub fn dataset(&self) -> Dataset {
        Dataset::from_rows(&self.rows, Some(self.labels.clone())).expect("generator rows are rectangular")
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = (STD_MIN.ln(), STD_MAX.ln());
    let centers: Vec<Vec<f64>> = (0..config.blobs)
        .map(|_| (0..config.dim).map(|_| rng.gen_range(0.15..0.85)).collect())
        .collect();
    let stds: Vec<Vec<f64>> = (0..config.blobs)
        .map(|_| (0..config.dim).map(|_| rng.gen_range(lo..hi).exp()).collect())
        .collect();

    let normals = config.normal_count();
    let mut samples: Vec<(Vec<f64>, usize, Option<usize>)> = Vec::with_capacity(config.n);
    for b in 0..config.blobs {
        let size = normals / config.blobs + usize::from(b < normals % config.blobs);
        let dists: Vec<Normal<f64>> = centers[b]
            .iter()
            .zip(&stds[b])
            .map(|(&m, &s)| Normal::new(m, s).expect("positive std"))
            .collect();
        for _ in 0..size {
            let row = dists.iter().map(|d| d.sample(&mut rng)).collect();
            samples.push((row, NORMAL, Some(b)));
        }
    }
    for _ in 0..config.anomaly_count() {
        let row = match config.anomalies {
            AnomalyKind::Uniform => (0..config.dim).map(|_| rng.gen::<f64>()).collect(),
            AnomalyKind::Contextual => {
                let b = rng.gen_range(0..config.blobs);
                let mut row: Vec<f64> = centers[b]
                    .iter()
                    .zip(&stds[b])
                    .map(|(&m, &s)| Normal::new(m, s).expect("positive std").sample(&mut rng))
                    .collect();
                let tight = (0..config.dim)
                    .min_by(|&a, &c| stds[b][a].total_cmp(&stds[b][c]))
                    .expect("dim > 0");
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                row[tight] = centers[b][tight] + sign * CONTEXT_SHIFT * stds[b][tight];
                row
            }
        };
        samples.push((row, ANOMALY, None));
    }
    samples.shuffle(&mut rng);

    let mut data = SynthData {
        rows: Vec::with_capacity(config.n),
        labels: Vec::with_capacity(config.n),
        blob: Vec::with_capacity(config.n),
        centers,
        stds,
    };
    for (row, label, blob) in samples {
        data.rows.push(row);
        data.labels.push(label);
        data.blob.push(blob);
    }
    Ok(data)
}

/// Header `f0,...,f{d-1},label`; labels are `normal` or `anomaly`.
pub fn write_csv(data: &SynthData, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let dim = data.rows.first().map_or(0, Vec::len);
    let mut line = String::new();
    for j in 0..dim {
        line.push_str(&format!("f{j},"));
    }
    line.push_str("label\n");
    out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        line.clear();
        for v in row {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(if label == ANOMALY { "anomaly\n" } else { "normal\n" });
        out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Schema matching [`write_csv`] output.
pub fn schema(dim: usize) -> Schema {
    let mut columns: Vec<Column> = (0..dim).map(|j| Column::new(format!("f{j}"), ColumnKind::Numeric)).collect();
    columns.push(Column::new("label", ColumnKind::Ignore));
    Schema::new(columns)
        .with_label(dim, PositiveRule::Equals("anomaly".into()))
        .with_header(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_cap() {
        let cfg = SynthConfig {
            n: 10_000,
            blobs: 5,
            dim: 4,
            anom_frac: 0.01,
            seed: 1,
            anomalies: AnomalyKind::Uniform,
        };
        let d = generate(&cfg).unwrap();
        assert_eq!(d.rows.len(), 10_000);
        assert_eq!(d.labels.iter().filter(|&&l| l == ANOMALY).count(), 100);
        let bad = SynthConfig { anom_frac: 0.5, ..cfg };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn contextual_anomalies_sit_off_the_tight_axis() {
        let cfg = SynthConfig {
            n: 500,
            blobs: 2,
            dim: 3,
            anom_frac: 0.02,
            seed: 5,
            anomalies: AnomalyKind::Contextual,
        };
        let d = generate(&cfg).unwrap();
        for (row, _) in d.rows.iter().zip(&d.labels).filter(|(_, &l)| l == ANOMALY) {
            let shifted = (0..2).any(|b| {
                (0..3).any(|j| ((row[j] - d.centers[b][j]).abs() / d.stds[b][j] - CONTEXT_SHIFT).abs() < 1e-9)
            });
            assert!(shifted);
        }
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig { n: 300, seed: 3, ..Default::default() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_ne!(generate(&cfg).unwrap(), generate(&SynthConfig { seed: 4, ..cfg }).unwrap());
    }
}
