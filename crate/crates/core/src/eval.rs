//! Summary quality (conciseness, information loss), detection metrics and the
//! baseline summarizers they are compared against.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{anomaly_fraction, Dataset, ANOMALY};
use crate::error::{Error, Result};
use crate::kmeans::lloyd;
use crate::space::{dist, UniqueRows};
use crate::summary::Summary;
use crate::train::ClusterModel;

/// `N / S`.
pub fn conciseness(n: usize, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidConfig("summary size must be at least 1".into()));
    }
    Ok(n as f64 / s as f64)
}

/// Unrepresented over represented unique samples.
///
/// A unique feature vector is represented when some summary member lies
/// within `epsilon` of it; `epsilon = 0` means an exact match. With a model,
/// distances use the weights of the sample's cluster, otherwise unit weights.
pub fn information_loss(
    dataset: &Dataset,
    summary: &Summary,
    epsilon: f64,
    model: Option<&ClusterModel>,
) -> Result<f64> {
    if summary.is_empty() {
        return Err(Error::InvalidConfig("summary is empty".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig("epsilon must be nonnegative".into()));
    }
    let uniq = UniqueRows::new(dataset);
    let mut first_of = vec![usize::MAX; uniq.count()];
    for i in 0..dataset.len() {
        let u = uniq.id(i) as usize;
        if first_of[u] == usize::MAX {
            first_of[u] = i;
        }
    }
    let in_summary: HashSet<u32> = summary.members.iter().map(|&p| uniq.id(p)).collect();

    let represented = if epsilon == 0.0 {
        in_summary.len()
    } else {
        let ones = vec![1.0; dataset.dim()];
        first_of
            .par_iter()
            .enumerate()
            .filter(|(u, &i)| {
                if in_summary.contains(&(*u as u32)) {
                    return true;
                }
                let w = model.map_or(ones.as_slice(), |m| m.weights.column(m.assignments[i]));
                let x = dataset.row(i);
                summary.members.iter().any(|&p| dist(x, dataset.row(p), w) <= epsilon)
            })
            .count()
    };
    if represented == 0 {
        return Err(Error::UndefinedLoss);
    }
    let lost = uniq.count() - represented;
    Ok(lost as f64 / represented as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts predicted-anomalous row ids against the dataset's labels.
pub fn confusion(predicted_row_ids: &[usize], dataset: &Dataset) -> Result<ConfusionCounts> {
    let labels = dataset.labels().ok_or(Error::NoLabels)?;
    let predicted: HashSet<usize> = predicted_row_ids.iter().copied().collect();
    let mut c = ConfusionCounts::default();
    for (&id, &label) in dataset.row_ids().iter().zip(labels) {
        match (predicted.contains(&id), label == ANOMALY) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Accuracy, recall and F1; `None` marks a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

/// Uniform sample of `s` rows without replacement.
pub fn baseline_random_summary(dataset: &Dataset, s: usize, seed: u64) -> Result<Summary> {
    if s > dataset.len() {
        return Err(Error::TooMany {
            requested: s,
            available: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = rand::seq::index::sample(&mut rng, dataset.len(), s).into_vec();
    Ok(Summary::from_positions(dataset, members, BTreeMap::from([(0, s)]), s))
}

/// Plain k-means centroids offered as a summary. The rows are synthetic:
/// in general they are not samples of the dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidSummary {
    pub rows: Vec<Vec<f64>>,
    pub synthetic: bool,
}

pub fn baseline_centroid_summary(dataset: &Dataset, k: usize, seed: u64) -> Result<CentroidSummary> {
    let fit = lloyd(dataset, k, seed, 100)?;
    Ok(CentroidSummary {
        rows: fit.centroids,
        synthetic: true,
    })
}

/// Whether `row` is bit-for-bit one of the dataset's feature vectors.
pub fn is_member(dataset: &Dataset, row: &[f64]) -> bool {
    dataset.rows().any(|r| r == row)
}

/// Everything one summarize/detect run reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub summary_size: Option<usize>,
    pub conciseness: Option<f64>,
    pub information_loss: Option<f64>,
    pub confusion: Option<ConfusionCounts>,
    pub metrics: Option<Metrics>,
    pub original_anomaly_fraction: Option<f64>,
    pub summary_anomaly_fraction: Option<f64>,
}

impl EvalReport {
    /// Summary-side fields for `summary` drawn from `dataset`.
    pub fn for_summary(dataset: &Dataset, summary: &Summary, epsilon: f64, model: Option<&ClusterModel>) -> Result<Self> {
        let mut report = EvalReport {
            n: dataset.len(),
            summary_size: Some(summary.len()),
            conciseness: Some(conciseness(dataset.len(), summary.len())?),
            information_loss: Some(information_loss(dataset, summary, epsilon, model)?),
            ..Default::default()
        };
        if dataset.labels().is_some() {
            report.original_anomaly_fraction = Some(anomaly_fraction(dataset)?);
            report.summary_anomaly_fraction = Some(anomaly_fraction(&dataset.subset(&summary.members))?);
        }
        Ok(report)
    }

    pub fn with_detection(mut self, dataset: &Dataset, predicted_row_ids: &[usize]) -> Result<Self> {
        let c = confusion(predicted_row_ids, dataset)?;
        self.n = dataset.len();
        self.metrics = Some(metrics(&c));
        self.confusion = Some(c);
        if self.original_anomaly_fraction.is_none() {
            self.original_anomaly_fraction = Some(anomaly_fraction(dataset)?);
        }
        Ok(self)
    }

    pub fn anomaly_fraction_delta(&self) -> Option<f64> {
        Some((self.summary_anomaly_fraction? - self.original_anomaly_fraction?).abs())
    }

    /// `key=value` lines; absent fields are omitted, undefined metrics are
    /// written as `undefined`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        let num = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        put("n", self.n.to_string());
        if let Some(s) = self.summary_size {
            put("summary_size", s.to_string());
        }
        if let Some(c) = self.conciseness {
            put("conciseness", c.to_string());
        }
        if let Some(l) = self.information_loss {
            put("info_loss", l.to_string());
        }
        if let Some(c) = self.confusion {
            put("tp", c.tp.to_string());
            put("fp", c.fp.to_string());
            put("tn", c.tn.to_string());
            put("fn", c.fn_.to_string());
        }
        if let Some(m) = self.metrics {
            put("accuracy", num(m.accuracy));
            put("recall", num(m.recall));
            put("f1", num(m.f1));
        }
        if let Some(f) = self.original_anomaly_fraction {
            put("orig_anom_frac", f.to_string());
        }
        if let Some(f) = self.summary_anomaly_fraction {
            put("summ_anom_frac", f.to_string());
        }
        if let Some(d) = self.anomaly_fraction_delta() {
            put("anom_frac_delta", d.to_string());
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{:.2}%", 100.0 * x));
        writeln!(f, "{:<28}{}", "samples", self.n)?;
        if let Some(s) = self.summary_size {
            writeln!(f, "{:<28}{}", "summary size", s)?;
        }
        if let Some(c) = self.conciseness {
            writeln!(f, "{:<28}{:.2}", "conciseness", c)?;
        }
        if let Some(l) = self.information_loss {
            writeln!(f, "{:<28}{:.4}", "information loss", l)?;
        }
        if let Some(c) = self.confusion {
            writeln!(f, "{:<28}tp={} fp={} tn={} fn={}", "confusion", c.tp, c.fp, c.tn, c.fn_)?;
        }
        if let Some(m) = self.metrics {
            writeln!(f, "{:<28}{}", "accuracy", pct(m.accuracy))?;
            writeln!(f, "{:<28}{}", "recall", pct(m.recall))?;
            writeln!(f, "{:<28}{}", "f1", pct(m.f1))?;
        }
        if self.original_anomaly_fraction.is_some() {
            writeln!(f, "{:<28}{}", "anomalies (original)", pct(self.original_anomaly_fraction))?;
        }
        if self.summary_anomaly_fraction.is_some() {
            writeln!(f, "{:<28}{}", "anomalies (summary)", pct(self.summary_anomaly_fraction))?;
        }
        Ok(())
    }
}
