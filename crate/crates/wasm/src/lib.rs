//! Browser bindings for the demo page in `www/`.
//!
//! A [`Session`] holds one generated dataset and the model trained on it.
//! Every call takes and returns JSON strings; errors surface as JS
//! exceptions carrying the message.

use insident::synth::{self, AnomalyKind, SynthConfig, SynthData};
use insident::{
    confusion, detect_top_n, metrics, score_all, summarize, train, ClusterModel, Dataset, EvalReport, LabelMode,
    TrainConfig, ANOMALY,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Deserialize)]
struct GenerateRequest {
    n: usize,
    blobs: usize,
    anom_frac: f64,
    #[serde(default)]
    contextual: bool,
    seed: u64,
}

#[derive(Deserialize)]
struct TrainRequest {
    k: usize,
    #[serde(default)]
    lr_w: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    max_iterations: Option<usize>,
    #[serde(default)]
    pseudo_labels: bool,
    seed: u64,
}

#[derive(Serialize)]
struct Points<'a> {
    rows: &'a [Vec<f64>],
    anomaly: Vec<bool>,
}

#[derive(Serialize)]
struct Trained<'a> {
    assignments: &'a [usize],
    centroids: &'a [Vec<f64>],
    weights: &'a [Vec<f64>],
    objective: Vec<f64>,
    converged: bool,
}

#[derive(Serialize)]
struct Summarized {
    members: Vec<usize>,
    per_cluster: Vec<(usize, usize)>,
    anomaly_fraction: f64,
    summary_anomaly_fraction: f64,
    information_loss: f64,
}

#[derive(Serialize)]
struct Detected {
    scores: Vec<f64>,
    flagged: Vec<usize>,
    recall: Option<f64>,
    f1: Option<f64>,
    /// Recall of the same top-n rule with every weight set to 1.
    unweighted_recall: Option<f64>,
}

#[wasm_bindgen]
pub struct Session {
    data: SynthData,
    dataset: Dataset,
    model: Option<ClusterModel>,
}

#[wasm_bindgen]
impl Session {
    /// Generates a two-feature synthetic dataset so it can be drawn as is.
    #[wasm_bindgen(constructor)]
    pub fn new(request: &str) -> Result<Session, JsError> {
        let r: GenerateRequest = serde_json::from_str(request).map_err(js_err)?;
        let config = SynthConfig {
            n: r.n,
            blobs: r.blobs,
            dim: 2,
            anom_frac: r.anom_frac,
            seed: r.seed,
            anomalies: if r.contextual { AnomalyKind::Contextual } else { AnomalyKind::Uniform },
        };
        let data = synth::generate(&config).map_err(js_err)?;
        let dataset = data.dataset();
        Ok(Session { data, dataset, model: None })
    }

    pub fn points(&self) -> Result<String, JsError> {
        let anomaly = self.data.labels.iter().map(|&l| l == ANOMALY).collect();
        serde_json::to_string(&Points {
            rows: &self.data.rows,
            anomaly,
        })
        .map_err(js_err)
    }

    pub fn train(&mut self, request: &str) -> Result<String, JsError> {
        let r: TrainRequest = serde_json::from_str(request).map_err(js_err)?;
        let mut config = TrainConfig::default().with_k(r.k).with_seed(r.seed);
        config.lr_w = r.lr_w.unwrap_or(config.lr_w);
        config.beta = r.beta.unwrap_or(config.beta);
        config.max_iterations = r.max_iterations.unwrap_or(config.max_iterations);
        if r.pseudo_labels {
            config.label_mode = LabelMode::Pseudo;
        }
        if config.k > self.dataset.len() {
            return Err(JsError::new("more clusters than points"));
        }
        let model = train(&self.dataset, &config).map_err(js_err)?;
        let out = serde_json::to_string(&Trained {
            assignments: &model.assignments,
            centroids: &model.centroids,
            weights: model.weights.columns(),
            objective: model.objective_trace.iter().map(|v| v.total).collect(),
            converged: model.converged,
        })
        .map_err(js_err)?;
        self.model = Some(model);
        Ok(out)
    }

    fn model(&self) -> Result<&ClusterModel, JsError> {
        self.model.as_ref().ok_or_else(|| JsError::new("train a model first"))
    }

    /// Summary of `size` original points; `members` are dataset positions.
    pub fn summarize(&self, size: usize) -> Result<String, JsError> {
        let model = self.model()?;
        let summary = summarize(model, &self.dataset, size).map_err(js_err)?;
        let report = EvalReport::for_summary(&self.dataset, &summary, 0.0, Some(model)).map_err(js_err)?;
        serde_json::to_string(&Summarized {
            per_cluster: summary.per_cluster_counts.iter().map(|(&k, &c)| (k, c)).collect(),
            members: summary.members,
            anomaly_fraction: report.original_anomaly_fraction.unwrap_or(0.0),
            summary_anomaly_fraction: report.summary_anomaly_fraction.unwrap_or(0.0),
            information_loss: report.information_loss.unwrap_or(f64::NAN),
        })
        .map_err(js_err)
    }

    /// Flags the `top_n` highest scores (0 means the true anomaly count).
    pub fn detect(&self, top_n: usize) -> Result<String, JsError> {
        let model = self.model()?;
        let n = if top_n == 0 { self.dataset.anomaly_count().map_err(js_err)? } else { top_n };
        let recall_of = |m: &ClusterModel| -> Result<(Vec<f64>, Vec<usize>, Option<f64>, Option<f64>), JsError> {
            let scores = score_all(m, &self.dataset);
            let flagged = detect_top_n(&scores, n).map_err(js_err)?;
            let met = metrics(&confusion(&flagged, &self.dataset).map_err(js_err)?);
            Ok((scores.iter().map(|s| s.score).collect(), flagged, met.recall, met.f1))
        };
        let (scores, flagged, recall, f1) = recall_of(model)?;

        let mut plain = model.clone();
        plain.weights = insident::WeightMatrix::ones(model.dim(), model.k());
        plain.assignments = insident::kmeans::assign_clusters(&self.dataset, &plain.centroids, &plain.weights);
        let unweighted_recall = recall_of(&plain)?.2;

        serde_json::to_string(&Detected {
            scores,
            flagged,
            recall,
            f1,
            unweighted_recall,
        })
        .map_err(js_err)
    }
}
