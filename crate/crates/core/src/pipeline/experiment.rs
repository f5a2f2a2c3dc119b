use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde_json::json;

use super::fitted::{align_all, covariance, fit_on, Prepared};
use super::{FilterConfig, FitSeeds, FittedPipeline, PipelineConfig, PipelineError};
use crate::class::{canonical_classes, ClassId};
use crate::eval::{
    accuracy, auc_macro_ovr, confusion_matrix, f1_macro, make_splits, patient_majority_vote, Diagnostics,
    FailedRepetition, MetricsReport, RepetitionMetrics,
};
use crate::signal::{MultiChannelRecording, SpatialFilter};
use crate::spd::SpdMatrix;

type Recording = MultiChannelRecording<f64>;

/// Repeated stratified patient leave-out: each repetition holds out one
/// patient per class, fits on the rest and scores every held-out
/// recording. Repetitions run in parallel; each one only depends on
/// `master_seed` and its index. A repetition that fails is listed in the
/// report; the call fails only when all of them do.
pub fn run_experiment(
    recordings: &[Recording],
    config: &PipelineConfig,
    repetitions: usize,
    master_seed: u64,
) -> Result<MetricsReport, PipelineError> {
    config.validate()?;
    if recordings.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if repetitions == 0 {
        return Err(PipelineError::InvalidConfig("repetitions must be at least 1".into()));
    }
    let aligned = align_all(recordings, config)?;
    let patients: Vec<(String, ClassId)> = aligned.iter().map(|r| (r.patient_id.clone(), r.label.clone())).collect();
    let plans = make_splits(&patients, repetitions, master_seed)?;
    let classes = canonical_classes(aligned.iter().map(|r| &r.label));

    let counter = AtomicU64::new(0);
    let cache = identity_covariances(&aligned, config, &counter)?;
    let prepared = Prepared { recordings: &aligned, covariances: cache.as_deref(), counter: &counter };

    let outcomes: Vec<Result<RepetitionMetrics, PipelineError>> = plans
        .par_iter()
        .map(|plan| {
            let train: Vec<usize> = (0..aligned.len()).filter(|&i| plan.is_train(&aligned[i].patient_id)).collect();
            let test: Vec<usize> = (0..aligned.len()).filter(|&i| plan.is_test(&aligned[i].patient_id)).collect();
            let fitted = fit_on(config, &prepared, &train, FitSeeds::derive(plan.seed))?;
            check_classes(&fitted, &classes)?;
            let mut metrics = score(&fitted, &prepared, &test, &classes)?;
            metrics.repetition = plan.repetition_index;
            metrics.n_train = train.len();
            Ok(metrics)
        })
        .collect();

    let mut per_repetition = Vec::with_capacity(outcomes.len());
    let mut failed = Vec::new();
    let mut first_error = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(m) => per_repetition.push(m),
            Err(e) => {
                log::warn!("repetition {r} failed: {e}");
                failed.push(FailedRepetition { repetition: r, error: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    if per_repetition.is_empty() {
        return Err(first_error.expect("at least one repetition"));
    }
    let described = json!({
        "pipeline": config,
        "repetitions": repetitions,
        "master_seed": master_seed,
        "recordings": aligned.len(),
        "patients": plans[0].train_patients.len() + plans[0].test_patients.len(),
        "evaluation": "stratified patient leave-out, recording-level metrics",
    });
    Ok(MetricsReport::new(
        described,
        classes,
        per_repetition,
        failed,
        Diagnostics { covariance_estimates: counter.load(Ordering::Relaxed) },
    ))
}

/// Scores every recording with an already fitted pipeline, as a report with
/// a single repetition.
pub fn score_dataset(model: &FittedPipeline, recordings: &[Recording]) -> Result<MetricsReport, PipelineError> {
    if recordings.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let aligned = align_all(recordings, &model.config)?;
    let classes = model.classes().to_vec();
    let counter = AtomicU64::new(0);
    let prepared = Prepared { recordings: &aligned, covariances: None, counter: &counter };
    let all: Vec<usize> = (0..aligned.len()).collect();
    let mut metrics = score(model, &prepared, &all, &classes)?;
    metrics.n_train = model.train_recordings;
    let described = json!({
        "pipeline": model.config,
        "seeds": model.seeds,
        "recordings": aligned.len(),
        "evaluation": "fitted model scored on every recording",
    });
    Ok(MetricsReport::new(
        described,
        classes,
        vec![metrics],
        Vec::new(),
        Diagnostics { covariance_estimates: counter.load(Ordering::Relaxed) },
    ))
}

fn identity_covariances(
    aligned: &[Recording],
    config: &PipelineConfig,
    counter: &AtomicU64,
) -> Result<Option<Vec<SpdMatrix<f64>>>, PipelineError> {
    if !config.row.flags().covariance || config.filter != FilterConfig::Identity {
        return Ok(None);
    }
    let channels = aligned[0].channels();
    let filter = SpatialFilter::identity(channels);
    let covs = aligned.par_iter().map(|r| covariance(r, &filter, config, counter)).collect::<Result<Vec<_>, _>>()?;
    Ok(Some(covs))
}

fn check_classes(model: &FittedPipeline, classes: &[ClassId]) -> Result<(), PipelineError> {
    if model.classes() != classes {
        return Err(PipelineError::ClassMismatch {
            trained: model.classes().iter().map(|c| c.to_string()).collect(),
            data: classes.iter().map(|c| c.to_string()).collect(),
        });
    }
    Ok(())
}

/// Recording-level metrics on `test`, scores ordered like `classes`.
fn score(
    model: &FittedPipeline,
    prepared: &Prepared<'_>,
    test: &[usize],
    classes: &[ClassId],
) -> Result<RepetitionMetrics, PipelineError> {
    let positions: Vec<usize> = classes
        .iter()
        .map(|c| model.classes().iter().position(|m| m == c))
        .collect::<Option<_>>()
        .ok_or_else(|| PipelineError::ClassMismatch {
            trained: model.classes().iter().map(|c| c.to_string()).collect(),
            data: classes.iter().map(|c| c.to_string()).collect(),
        })?;
    let predictions = test
        .par_iter()
        .map(|&i| {
            let cached = prepared.covariances.map(|c| &c[i]);
            model.predict_aligned(&prepared.recordings[i], cached, prepared.counter)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<ClassId> = test.iter().map(|&i| prepared.recordings[i].label.clone()).collect();
    let patients: Vec<String> = test.iter().map(|&i| prepared.recordings[i].patient_id.clone()).collect();
    let predicted: Vec<ClassId> = predictions.iter().map(|p| p.class.clone()).collect();
    let scores: Vec<Vec<f64>> =
        predictions.iter().map(|p| positions.iter().map(|&k| p.scores[k]).collect()).collect();

    let auc = auc_macro_ovr(&labels, &scores, classes)?;
    let votes = patient_majority_vote(&patients, &labels, &predicted, classes)?;
    let vote_accuracy = votes.iter().filter(|(_, truth, guess)| truth == guess).count() as f64 / votes.len() as f64;
    Ok(RepetitionMetrics {
        repetition: 0,
        accuracy: accuracy(&labels, &predicted)?,
        auc_macro_ovr: auc.macro_auc,
        f1_macro: f1_macro(&labels, &predicted)?,
        confusion: confusion_matrix(&labels, &predicted, classes)?,
        per_class_auc: auc.per_class,
        skipped_auc_classes: auc.skipped,
        n_train: 0,
        n_test: test.len(),
        patient_vote_accuracy: Some(vote_accuracy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::MlpConfig;
    use crate::pipeline::{fit_pipeline, AblationRow};
    use crate::signal::{generate_cohort, ClassCount, CohortSpec, RecordingCountSpec};

    fn mini(dispersion: f64, noise: f64) -> Vec<Recording> {
        generate_cohort(&mini_spec(dispersion, noise)).unwrap()
    }

    fn mini_spec(dispersion: f64, noise: f64) -> CohortSpec {
        CohortSpec {
            classes: ["A", "B", "C"].iter().map(|&n| ClassCount { name: n.into(), patients: 4 }).collect(),
            recordings_per_patient: RecordingCountSpec { mean: 3.0, min: 2, max: 4 },
            samples_per_recording: 300,
            within_class_dispersion: dispersion,
            noise_scale: noise,
            template_separation: 1.5,
            seed: 11,
            ..CohortSpec::default()
        }
    }

    fn config(row: &str) -> PipelineConfig {
        let mut c = PipelineConfig::for_row(row.parse::<AblationRow>().unwrap());
        c.align.window_samples = 250;
        c.mlp = MlpConfig { hidden: vec![16], epochs: 15, learning_rate: 0.01, ..MlpConfig::default() };
        c.flatten_stride = 10;
        c
    }

    #[test]
    fn degenerate_cohort_is_perfect_for_mdm() {
        let spec = CohortSpec { gain_log_std: 0.0, template_separation: 3.0, ..mini_spec(0.0, 0.0) };
        let data = generate_cohort(&spec).unwrap();
        let r = run_experiment(&data, &config("COV:mdm"), 5, 3).unwrap();
        assert!(r.per_repetition.iter().all(|m| m.accuracy == 1.0), "{:?}", r.aggregate);
    }

    #[test]
    fn same_seed_same_report() {
        let data = mini(0.4, 0.05);
        for row in ["MTS_COV:mlp", "TS_COV:svm", "VCG:svm"] {
            let a = run_experiment(&data, &config(row), 3, 9).unwrap();
            let b = run_experiment(&data, &config(row), 3, 9).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{row}");
        }
    }

    #[test]
    fn single_repetition_has_zero_std() {
        let r = run_experiment(&mini(0.4, 0.05), &config("TS:mdm"), 1, 1).unwrap();
        assert_eq!(r.aggregate.accuracy.std, 0.0);
        assert_eq!(r.aggregate.auc_macro_ovr.std, 0.0);
    }

    #[test]
    fn time_series_rows_estimate_no_covariance() {
        let data = mini(0.4, 0.05);
        let def = run_experiment(&data, &config("DEF:mlp"), 2, 1).unwrap();
        assert_eq!(def.diagnostics.covariance_estimates, 0);
        let cov = run_experiment(&data, &config("COV:svm"), 2, 1).unwrap();
        assert_eq!(cov.diagnostics.covariance_estimates, data.len() as u64);
    }

    #[test]
    fn accuracy_is_confusion_trace() {
        let r = run_experiment(&mini(0.4, 0.05), &config("MTS:svm"), 4, 2).unwrap();
        for m in &r.per_repetition {
            let total: u64 = m.confusion.iter().flatten().sum();
            let trace: u64 = (0..m.confusion.len()).map(|k| m.confusion[k][k]).sum();
            assert_eq!(total as usize, m.n_test);
            assert_eq!(m.accuracy, trace as f64 / total as f64);
            assert!(m.per_class_auc.iter().all(|a| a.is_some()));
        }
    }

    #[test]
    fn fitted_model_round_trips_through_json() {
        let data = mini(0.3, 0.05);
        for row in ["MTS_COV:mlp", "COV:mdm", "TS:mdm", "DEF_2D:svm"] {
            let model = fit_pipeline(&data, &config(row), 4).unwrap();
            let back = FittedPipeline::from_json(&model.to_json()).unwrap();
            for rec in data.iter().take(5) {
                assert_eq!(model.predict(rec).unwrap(), back.predict(rec).unwrap(), "{row}");
            }
            let report = score_dataset(&back, &data).unwrap();
            assert_eq!(report.per_repetition[0].n_test, data.len());
        }
        let text = fit_pipeline(&data, &config("COV:mdm"), 4).unwrap().to_json().replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(FittedPipeline::from_json(&text), Err(PipelineError::SchemaVersion(7))));
    }

    #[test]
    fn xdawn_filter_runs() {
        let mut c = config("TS:svm");
        c.filter = FilterConfig::Xdawn { filters_per_class: 2 };
        let r = run_experiment(&mini(0.3, 0.05), &c, 2, 5).unwrap();
        assert!(r.failed_repetitions.is_empty());
    }
}
