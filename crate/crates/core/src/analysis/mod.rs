//! Clustering metrics, parameter recovery, diffusion hypothesis tests,
//! live-edge correlations and the sample-size bound.

mod clustering;
mod correlation;
mod hypothesis;
mod recovery;
mod sample_size;

pub use clustering::{
    assign_clusters, clustering_metrics, map_clusters_to_labels, stratified_holdout,
    ClusterAssignment, ClusterMapping, ClusterMetrics,
};
pub use correlation::{pairwise_correlation, sample_mixture_live_edges, CorrelationMatrix};
pub use hypothesis::{
    ecdf, log_mean_delays, mann_whitney_exact, mann_whitney_normal, mann_whitney_u,
    structural_test, temporal_test, welch_t_test, TestResult, EXACT_MWU_LIMIT,
};
pub use recovery::{evaluate_labelled_set, recovery_error, RecoveryError, SetEvaluation};
pub use sample_size::{required_samples, samples_for_matrix, SampleSizeReport, SampleSizeSpec};
