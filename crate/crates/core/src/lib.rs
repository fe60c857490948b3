//! Locally weighted k-means for summarizing traffic tables.
//!
//! Training learns one centroid and one nonnegative feature-weight vector
//! per cluster by trading k-means compactness against a smooth surrogate of
//! the nearest-neighbour classification error inside each cluster. The
//! resulting local metrics drive two products: summaries made of original
//! rows, allocated to clusters in proportion to their size, and anomaly
//! scores based on the weighted distance to the assigned centroid.
//!
//! ```
//! use insident::{synth, train, summarize, TrainConfig};
//!
//! let data = synth::generate(&synth::SynthConfig { n: 400, blobs: 3, dim: 3, ..Default::default() }).unwrap();
//! let dataset = data.dataset();
//! let model = train(&dataset, &TrainConfig::default().with_k(3).with_seed(1)).unwrap();
//! let summary = summarize(&model, &dataset, 40).unwrap();
//! assert_eq!(summary.len(), 40);
//! ```

pub mod data;
pub mod detect;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod space;
pub mod summary;
pub mod synth;
pub mod train;

pub use data::{load_dataset, load_table, Dataset, LoadOptions, Schema, Table, ANOMALY, NORMAL};
pub use detect::{detect_threshold, detect_top_n, score_all, ScoredSample};
pub use error::{Error, Result};
pub use eval::{conciseness, confusion, information_loss, metrics, EvalReport, Metrics};
pub use space::{objective, sigmoid, sigmoid_derivative, weighted_distance, WeightMatrix};
pub use summary::{summarize, summarize_with, SelectionMode, Summary, SummaryOptions};
pub use train::{train, CentroidUpdate, ClusterModel, LabelMode, TrainConfig};
