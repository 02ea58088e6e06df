//! Evaluation: metrics, downstream classifiers, rank statistics and the
//! cross-validated oversampling and fidelity protocols.

pub mod classifier;
pub mod metrics;
pub mod plot;
pub mod protocol;
pub mod stats;

pub use classifier::{Classifier, ClassifierKind, FeatureEncoder, MlpClassifier, MlpConfig, NearestNeighbor};
pub use metrics::{balanced_accuracy, balanced_accuracy_present, f1_score, percent_difference};
pub use protocol::{
    fidelity_experiment, oversampling_experiment, run_experiment, score_matrix, Cell, Method, MethodReport,
    MetricReport, Protocol, ProtocolConfig,
};
pub use stats::{friedman_test, mean_ranks, FriedmanResult, ScoreMatrix};
