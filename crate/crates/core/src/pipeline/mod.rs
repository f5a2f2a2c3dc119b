//! The end-to-end prediction pipeline in `f64`: R-peak alignment, optional
//! VCG rotation augmentation, covariance estimation, optional geodesic
//! mixup, optional tangent projection, and a classifier. Also the repeated
//! stratified patient leave-out experiment built on top of it.

mod experiment;
mod export;
mod fitted;
mod row;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use experiment::{run_experiment, score_dataset};
pub use export::{feature_table, FeatureTable};
pub use fitted::{fit_pipeline, FittedClassifier, FittedPipeline, MODEL_SCHEMA_VERSION};
pub use row::{AblationRow, ClassifierKind, ParseRowError, RowFlags, RowName, TangentChoice};

use crate::augment::{AugmentError, MixupConfig};
use crate::classify::{ClassifyError, MlpConfig, SvmConfig};
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::signal::{AlignConfig, MultiChannelRecording, SignalError, DEFAULT_SHRINKAGE};
use crate::spd::{KarcherConfig, SpdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterConfig {
    Identity,
    Xdawn { filters_per_class: usize },
}

/// Random VCG rotations added to the training recordings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VcgAugmentConfig {
    /// Each axis angle has magnitude uniform in `[min_angle_deg, max_angle_deg]` and a random sign.
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub copies_per_recording: usize,
}

impl Default for VcgAugmentConfig {
    fn default() -> Self {
        VcgAugmentConfig { min_angle_deg: 5.0, max_angle_deg: 45.0, copies_per_recording: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub row: AblationRow,
    pub align: AlignConfig,
    pub shrinkage: f64,
    pub filter: FilterConfig,
    pub karcher: KarcherConfig,
    /// Its `seed` is replaced by a per-fit seed.
    pub mixup: MixupConfig,
    pub vcg: VcgAugmentConfig,
    /// Its `seed` is replaced by a per-fit seed.
    pub mlp: MlpConfig,
    /// Its `seed` is replaced by a per-fit seed.
    pub svm: SvmConfig,
    /// Time-series rows keep every `flatten_stride`-th sample of each channel.
    pub flatten_stride: usize,
}

impl Default for AblationRow {
    fn default() -> Self {
        AblationRow { name: RowName::MtsCov, classifier: ClassifierKind::Mlp }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            row: AblationRow::default(),
            align: AlignConfig::default(),
            shrinkage: DEFAULT_SHRINKAGE,
            filter: FilterConfig::Identity,
            karcher: KarcherConfig::default(),
            mixup: MixupConfig::default(),
            vcg: VcgAugmentConfig::default(),
            mlp: MlpConfig::default(),
            svm: SvmConfig::default(),
            flatten_stride: 1,
        }
    }
}

impl PipelineConfig {
    pub fn for_row(row: AblationRow) -> Self {
        PipelineConfig { row, ..PipelineConfig::default() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !self.row.name.supports(self.row.classifier) {
            return bad(format!("{} is not a supported grid cell", self.row));
        }
        if self.flatten_stride == 0 {
            return bad("flatten_stride must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return bad(format!("shrinkage {} outside [0, 1]", self.shrinkage));
        }
        if let FilterConfig::Xdawn { filters_per_class: 0 } = self.filter {
            return bad("xdawn needs at least one filter per class".into());
        }
        let v = &self.vcg;
        if !(0.0 <= v.min_angle_deg && v.min_angle_deg <= v.max_angle_deg && v.max_angle_deg <= 45.0) {
            return bad(format!("VCG angles must satisfy 0 <= {} <= {} <= 45", v.min_angle_deg, v.max_angle_deg));
        }
        self.mixup.validate()?;
        Ok(())
    }
}

/// Seeds of the random parts of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitSeeds {
    pub mixup: u64,
    pub vcg: u64,
    pub classifier: u64,
}

impl FitSeeds {
    pub fn derive(seed: u64) -> FitSeeds {
        FitSeeds { mixup: derive_seed(seed, 1), vcg: derive_seed(seed, 2), classifier: derive_seed(seed, 3) }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("no recordings")]
    EmptyDataset,
    #[error("model was trained on classes {trained:?} but the data has {data:?}")]
    ClassMismatch { trained: Vec<String>, data: Vec<String> },
    #[error("model schema version {0} is not supported (expected {MODEL_SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Spd(#[from] SpdError),
}

impl PipelineError {
    /// Failures of the numerics (non-SPD matrices, divergent iterations)
    /// rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PipelineError::Spd(_)
                | PipelineError::Signal(SignalError::DegenerateSignal(_) | SignalError::SingularPooledCovariance | SignalError::Spd(_))
                | PipelineError::Augment(AugmentError::Spd(_))
                | PipelineError::Feature(FeatureError::Spd(_))
                | PipelineError::Classify(ClassifyError::Spd(_))
        )
    }
}

/// Channel-major samples `x[c, 0], x[c, stride], …` of every channel.
pub fn flatten_series<T: Scalar>(rec: &MultiChannelRecording<T>, stride: usize) -> Array1<T> {
    let s = rec.samples();
    let per_channel = s.ncols().div_ceil(stride);
    let mut out = Vec::with_capacity(s.nrows() * per_channel);
    for row in s.rows() {
        out.extend(row.iter().step_by(stride).copied());
    }
    Array1::from(out)
}
