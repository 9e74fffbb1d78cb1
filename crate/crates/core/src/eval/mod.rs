//! Relevance judgments, effectiveness measures, the clustering-hypothesis
//! matrix and intra-list similarity.

mod cluster;
mod ils;
mod metrics;
mod qrels;

pub use cluster::{cluster_matrix, ClusterMatrix};
pub use ils::ils;
pub use metrics::{
    average_precision, judged, ndcg, recall, reciprocal_rank, write_report, Gain, Metric, MetricValues,
    DEFAULT_MIN_REL, METRIC_SYNTAX,
};
pub use qrels::{Qrels, MAX_LABEL};
