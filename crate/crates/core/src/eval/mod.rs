//! Stratified patient leave-out evaluation: split plans, recording-level
//! metrics, aggregation over repetitions and the variance-corrected paired
//! t-test for comparing two pipelines on the same splits.

mod metrics;
mod report;
mod splits;
mod ttest;

use thiserror::Error;

pub use metrics::{
    accuracy, auc_binary_doubled, auc_macro_ovr, confusion_matrix, f1_macro, patient_majority_vote, AucSummary,
};
pub use report::{
    compare_reports, confusion_csv, Aggregate, Diagnostics, FailedRepetition, MetricComparison, MetricsReport, RepetitionMetrics,
    Summary, REPORT_SCHEMA_VERSION,
};
pub use splits::{make_splits, SplitPlan};
pub use ttest::{
    corrected_paired_ttest, ln_gamma, regularized_incomplete_beta, student_t_two_sided_p, TTestResult,
};

use crate::class::ClassId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("class {0} has fewer than 2 patients; leave-out needs one for testing and one for training")]
    ClassTooSmall(ClassId),
    #[error("patient {0} appears with more than one label")]
    InconsistentPatient(String),
    #[error("no class has both positive and negative test samples")]
    NoEvaluableClass,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} labels vs {1} predictions or scores")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("differences have zero variance with mean {mean}; t = {t}")]
    ZeroVariance { t: f64, mean: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
