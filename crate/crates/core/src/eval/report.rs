use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ttest::{corrected_paired_ttest, TTestResult};
use super::EvalError;
use crate::class::ClassId;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Metrics of one train/test split, computed per recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionMetrics {
    pub repetition: usize,
    pub accuracy: f64,
    pub auc_macro_ovr: f64,
    pub f1_macro: f64,
    /// Rows are true classes, columns predicted, in report class order.
    pub confusion: Vec<Vec<u64>>,
    /// `None` where the class had no positive or no negative test recording.
    pub per_class_auc: Vec<Option<f64>>,
    pub skipped_auc_classes: Vec<ClassId>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_vote_accuracy: Option<f64>,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: Summary,
    pub auc_macro_ovr: Summary,
    pub f1_macro: Summary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Number of covariance matrices estimated over the whole run.
    pub covariance_estimates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRepetition {
    pub repetition: usize,
    pub error: String,
}

/// Outcome of a repeated leave-out experiment. Contains no timestamps or
/// host details, so identical runs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub classes: Vec<ClassId>,
    pub per_repetition: Vec<RepetitionMetrics>,
    pub aggregate: Aggregate,
    /// Mean over repetitions where the class was evaluable.
    pub per_class_auc: BTreeMap<ClassId, f64>,
    /// Recording counts averaged over repetitions; their ratio is the
    /// correction term of the paired t-test.
    pub mean_n_train: f64,
    pub mean_n_test: f64,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_repetitions: Vec<FailedRepetition>,
}

impl MetricsReport {
    pub fn new(
        config: serde_json::Value,
        classes: Vec<ClassId>,
        per_repetition: Vec<RepetitionMetrics>,
        failed_repetitions: Vec<FailedRepetition>,
        diagnostics: Diagnostics,
    ) -> MetricsReport {
        let column = |f: fn(&RepetitionMetrics) -> f64| per_repetition.iter().map(f).collect::<Vec<_>>();
        let aggregate = Aggregate {
            accuracy: Summary::of(&column(|r| r.accuracy)),
            auc_macro_ovr: Summary::of(&column(|r| r.auc_macro_ovr)),
            f1_macro: Summary::of(&column(|r| r.f1_macro)),
        };
        let mut per_class_auc = BTreeMap::new();
        for (k, class) in classes.iter().enumerate() {
            let values: Vec<f64> = per_repetition.iter().filter_map(|r| r.per_class_auc.get(k).copied().flatten()).collect();
            if !values.is_empty() {
                per_class_auc.insert(class.clone(), Summary::of(&values).mean);
            }
        }
        let n = per_repetition.len().max(1) as f64;
        MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config,
            mean_n_train: per_repetition.iter().map(|r| r.n_train as f64).sum::<f64>() / n,
            mean_n_test: per_repetition.iter().map(|r| r.n_test as f64).sum::<f64>() / n,
            classes,
            per_repetition,
            aggregate,
            per_class_auc,
            diagnostics,
            failed_repetitions,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<MetricsReport, EvalError> {
        let report: MetricsReport =
            serde_json::from_str(text).map_err(|e| EvalError::InvalidInput(format!("report: {e}")))?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(EvalError::InvalidInput(format!(
                "report schema version {} (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// Confusion counts summed over repetitions, with a header row and a
/// leading label column.
pub fn confusion_csv(report: &MetricsReport) -> String {
    let k = report.classes.len();
    let mut total = vec![vec![0u64; k]; k];
    for r in &report.per_repetition {
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                total[i][j] += c;
            }
        }
    }
    let mut out = String::from("true\\predicted");
    for c in &report.classes {
        out.push(',');
        out.push_str(c.as_str());
    }
    out.push('\n');
    for (c, row) in report.classes.iter().zip(&total) {
        out.push_str(c.as_str());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Present unless the test is undefined for these differences.
    pub test: Option<TTestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Corrected paired t-test of `a − b` per metric over the repetitions both
/// reports completed. The correction ratio uses the recording counts of `a`.
pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<Vec<MetricComparison>, EvalError> {
    let by_rep: BTreeMap<usize, &RepetitionMetrics> = b.per_repetition.iter().map(|r| (r.repetition, r)).collect();
    let pairs: Vec<(&RepetitionMetrics, &RepetitionMetrics)> =
        a.per_repetition.iter().filter_map(|r| by_rep.get(&r.repetition).map(|s| (r, *s))).collect();
    if pairs.len() < 2 {
        return Err(EvalError::TooFewRepetitions(pairs.len()));
    }
    let metrics: [(&str, fn(&RepetitionMetrics) -> f64); 3] =
        [("accuracy", |r| r.accuracy), ("auc_macro_ovr", |r| r.auc_macro_ovr), ("f1_macro", |r| r.f1_macro)];
    let n = pairs.len() as f64;
    let mut out = Vec::with_capacity(metrics.len());
    for (name, get) in metrics {
        let diffs: Vec<f64> = pairs.iter().map(|(x, y)| get(x) - get(y)).collect();
        let (test, note) = match corrected_paired_ttest(&diffs, a.mean_n_train, a.mean_n_test) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        out.push(MetricComparison {
            metric: name.to_string(),
            mean_a: pairs.iter().map(|(x, _)| get(x)).sum::<f64>() / n,
            mean_b: pairs.iter().map(|(_, y)| get(y)).sum::<f64>() / n,
            test,
            note,
        });
    }
    Ok(out)
}
