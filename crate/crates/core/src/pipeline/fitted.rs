use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{flatten_series, FilterConfig, FitSeeds, PipelineConfig, PipelineError, TangentChoice};
use crate::augment::{augment_training_set, MixupConfig};
use crate::class::ClassId;
use crate::classify::{
    mdm_fit, mlp_fit, svm_fit, LinearSvmModel, MdmModel, MlpConfig, MlpModel, NearestCentroid, Prediction, SvmConfig,
};
use crate::features::{fit_tangent, TangentMode, TangentSpaceModel};
use crate::pipeline::ClassifierKind;
use crate::rng::stream_rng;
use crate::signal::{
    align_r_peaks, estimate_covariance, fit_xdawn, vcg_augment, MultiChannelRecording, SpatialFilter,
};
use crate::spd::{pack_upper, SpdMatrix, SpdSample};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

type Recording = MultiChannelRecording<f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedClassifier {
    Mlp(MlpModel<f64>),
    Svm(LinearSvmModel<f64>),
    /// Riemannian centroids of raw covariances.
    Mdm(MdmModel<f64>),
    /// Euclidean centroids of tangent vectors.
    NearestCentroid(NearestCentroid<f64>),
}

impl FittedClassifier {
    pub fn classes(&self) -> &[ClassId] {
        match self {
            FittedClassifier::Mlp(m) => m.classes(),
            FittedClassifier::Svm(m) => m.classes(),
            FittedClassifier::Mdm(m) => m.classes(),
            FittedClassifier::NearestCentroid(m) => m.classes(),
        }
    }
}

/// A trained pipeline, serializable as a versioned JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub seeds: FitSeeds,
    /// Real (not augmented) training recordings.
    pub train_recordings: usize,
    /// Present for covariance rows.
    pub filter: Option<SpatialFilter<f64>>,
    pub tangent: Option<TangentSpaceModel<f64>>,
    pub classifier: FittedClassifier,
}

/// Aligned recordings with, for identity-filter covariance rows, their
/// covariances computed once up front.
pub(crate) struct Prepared<'a> {
    pub recordings: &'a [Recording],
    pub covariances: Option<&'a [SpdMatrix<f64>]>,
    pub counter: &'a AtomicU64,
}

enum Input {
    Vector(Array1<f64>),
    Matrix(SpdMatrix<f64>),
}

/// Aligns `recordings` and fits on all of them; `seed` drives every random step.
pub fn fit_pipeline(recordings: &[Recording], config: &PipelineConfig, seed: u64) -> Result<FittedPipeline, PipelineError> {
    config.validate()?;
    if recordings.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let aligned = align_all(recordings, config)?;
    let counter = AtomicU64::new(0);
    let prepared = Prepared { recordings: &aligned, covariances: None, counter: &counter };
    let all: Vec<usize> = (0..aligned.len()).collect();
    fit_on(config, &prepared, &all, FitSeeds::derive(seed))
}

pub(crate) fn align_all(recordings: &[Recording], config: &PipelineConfig) -> Result<Vec<Recording>, PipelineError> {
    Ok(recordings.par_iter().map(|r| align_r_peaks(r, &config.align)).collect::<Result<Vec<_>, _>>()?)
}

pub(crate) fn covariance(
    rec: &Recording,
    filter: &SpatialFilter<f64>,
    config: &PipelineConfig,
    counter: &AtomicU64,
) -> Result<SpdMatrix<f64>, PipelineError> {
    counter.fetch_add(1, Ordering::Relaxed);
    Ok(estimate_covariance(rec, filter, config.shrinkage)?)
}

fn rotated_copies(
    recs: &[&Recording],
    config: &PipelineConfig,
    seed: u64,
) -> Result<Vec<Recording>, PipelineError> {
    let v = &config.vcg;
    let copies = v.copies_per_recording;
    (0..recs.len() * copies)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let mut angle = || {
                let magnitude = rng.random_range(v.min_angle_deg..=v.max_angle_deg);
                if rng.random_bool(0.5) { magnitude } else { -magnitude }
            };
            let angles = (angle(), angle(), angle());
            Ok(vcg_augment(recs[j / copies], angles)?)
        })
        .collect()
}

fn stack(rows: Vec<Array1<f64>>) -> Array2<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.into_iter()).collect();
    Array2::from_shape_vec((n, d), flat).expect("rows have equal length")
}

fn fit_vectors(
    kind: ClassifierKind,
    x: &Array2<f64>,
    labels: &[ClassId],
    config: &PipelineConfig,
    seed: u64,
) -> Result<FittedClassifier, PipelineError> {
    Ok(match kind {
        ClassifierKind::Mlp => {
            FittedClassifier::Mlp(mlp_fit(&x.view(), labels, &MlpConfig { seed, ..config.mlp.clone() })?)
        }
        ClassifierKind::Svm => {
            FittedClassifier::Svm(svm_fit(&x.view(), labels, &SvmConfig { seed, ..config.svm.clone() })?)
        }
        ClassifierKind::Mdm => FittedClassifier::NearestCentroid(NearestCentroid::fit(&x.view(), labels)?),
    })
}

/// Fits on the prepared recordings at `train`.
pub(crate) fn fit_on(
    config: &PipelineConfig,
    prepared: &Prepared<'_>,
    train: &[usize],
    seeds: FitSeeds,
) -> Result<FittedPipeline, PipelineError> {
    let flags = config.row.flags();
    let originals: Vec<&Recording> = train.iter().map(|&i| &prepared.recordings[i]).collect();
    let extra = if flags.vcg_augment { rotated_copies(&originals, config, seeds.vcg)? } else { Vec::new() };
    let labels: Vec<ClassId> = originals.iter().map(|r| r.label.clone()).chain(extra.iter().map(|r| r.label.clone())).collect();
    let done = |filter, tangent, classifier| FittedPipeline {
        schema_version: MODEL_SCHEMA_VERSION,
        config: config.clone(),
        seeds,
        train_recordings: train.len(),
        filter,
        tangent,
        classifier,
    };

    if !flags.covariance {
        let rows: Vec<Array1<f64>> = originals
            .par_iter()
            .map(|r| flatten_series(r, config.flatten_stride))
            .chain(extra.par_iter().map(|r| flatten_series(r, config.flatten_stride)))
            .collect();
        let classifier = fit_vectors(config.row.classifier, &stack(rows), &labels, config, seeds.classifier)?;
        return Ok(done(None, None, classifier));
    }

    let channels = originals.first().map_or(0, |r| r.channels());
    let filter = match config.filter {
        FilterConfig::Identity => SpatialFilter::identity(channels),
        FilterConfig::Xdawn { filters_per_class } => {
            let all: Vec<Recording> = originals.iter().map(|&r| r.clone()).chain(extra.iter().cloned()).collect();
            fit_xdawn(&all, filters_per_class)?
        }
    };
    let cached = match config.filter {
        FilterConfig::Identity => prepared.covariances,
        FilterConfig::Xdawn { .. } => None,
    };
    let mut matrices: Vec<SpdMatrix<f64>> = match cached {
        Some(c) => train.iter().map(|&i| c[i].clone()).collect(),
        None => originals
            .par_iter()
            .map(|r| covariance(r, &filter, config, prepared.counter))
            .collect::<Result<_, _>>()?,
    };
    matrices.extend(
        extra.par_iter().map(|r| covariance(r, &filter, config, prepared.counter)).collect::<Result<Vec<_>, _>>()?,
    );
    let patients = originals.iter().map(|r| r.patient_id.clone()).chain(extra.iter().map(|r| r.patient_id.clone()));
    let mut samples: Vec<SpdSample<f64>> = matrices
        .into_iter()
        .zip(labels)
        .zip(patients)
        .map(|((m, label), patient)| {
            let mut s = SpdSample::labelled(m, label);
            s.patient_id = Some(patient);
            s
        })
        .collect();
    if flags.cov_mixup {
        samples = augment_training_set(&samples, &MixupConfig { seed: seeds.mixup, ..config.mixup.clone() })?;
    }
    let labels: Vec<ClassId> = samples.iter().map(|s| s.label.clone().expect("labelled")).collect();

    let mode = match flags.tangent {
        TangentChoice::None => None,
        TangentChoice::Single => Some(TangentMode::Single),
        TangentChoice::Multiple => Some(TangentMode::Multiple),
    };
    let Some(mode) = mode else {
        let classifier = match config.row.classifier {
            ClassifierKind::Mdm => FittedClassifier::Mdm(mdm_fit(&samples, &config.karcher)?),
            kind => {
                let rows: Vec<Array1<f64>> = samples.par_iter().map(|s| pack_upper(s.matrix.data())).collect();
                fit_vectors(kind, &stack(rows), &labels, config, seeds.classifier)?
            }
        };
        return Ok(done(Some(filter), None, classifier));
    };
    let tangent = fit_tangent(&samples, mode, &config.karcher)?;
    let rows: Vec<Array1<f64>> =
        samples.par_iter().map(|s| tangent.transform(&s.matrix)).collect::<Result<_, _>>()?;
    let classifier = fit_vectors(config.row.classifier, &stack(rows), &labels, config, seeds.classifier)?;
    Ok(done(Some(filter), Some(tangent), classifier))
}

impl FittedPipeline {
    pub fn classes(&self) -> &[ClassId] {
        self.classifier.classes()
    }

    /// Aligns a raw recording and predicts its class.
    pub fn predict(&self, rec: &Recording) -> Result<Prediction, PipelineError> {
        let aligned = align_r_peaks(rec, &self.config.align)?;
        self.predict_aligned(&aligned, None, &AtomicU64::new(0))
    }

    /// Predicts an already aligned recording. `cached` is its identity-filter
    /// covariance when known.
    pub(crate) fn predict_aligned(
        &self,
        rec: &Recording,
        cached: Option<&SpdMatrix<f64>>,
        counter: &AtomicU64,
    ) -> Result<Prediction, PipelineError> {
        let input = match &self.filter {
            None => Input::Vector(flatten_series(rec, self.config.flatten_stride)),
            Some(filter) => {
                let cov = match cached {
                    Some(c) if filter.kind == crate::signal::FilterKind::Identity => c.clone(),
                    _ => covariance(rec, filter, &self.config, counter)?,
                };
                match (&self.tangent, &self.classifier) {
                    (Some(t), _) => Input::Vector(t.transform(&cov)?),
                    (None, FittedClassifier::Mdm(_)) => Input::Matrix(cov),
                    (None, _) => Input::Vector(pack_upper(cov.data())),
                }
            }
        };
        Ok(match (&self.classifier, input) {
            (FittedClassifier::Mdm(m), Input::Matrix(c)) => m.predict(&c)?,
            (FittedClassifier::Mlp(m), Input::Vector(x)) => m.predict(&x)?,
            (FittedClassifier::Svm(m), Input::Vector(x)) => m.predict(&x)?,
            (FittedClassifier::NearestCentroid(m), Input::Vector(x)) => m.predict(&x)?,
            _ => return Err(PipelineError::ModelFormat("classifier does not match its input representation".into())),
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<FittedPipeline, PipelineError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PipelineError::ModelFormat(e.to_string()))?;
        let version = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_SCHEMA_VERSION {
            return Err(PipelineError::SchemaVersion(version));
        }
        serde_json::from_value(value).map_err(|e| PipelineError::ModelFormat(e.to_string()))
    }
}
