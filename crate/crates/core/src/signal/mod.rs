//! Signal-domain preprocessing: R-peak alignment, spatial filtering,
//! covariance estimation, VCG rotation augmentation and the synthetic cohort.

mod align;
mod cohort;
mod covariance;
pub mod dataset;
mod dower;
mod recording;
mod xdawn;

use thiserror::Error;

pub use align::{align_r_peaks, AlignConfig};
pub use cohort::{
    default_class_templates, generate_cohort, patient_recordings, ClassCount, CohortSpec, PatientPlan, RecordingCountSpec,
};
pub use covariance::{estimate_covariance, DEFAULT_SHRINKAGE};
pub use dower::{
    dower_to_vcg, forward_dower_matrix, inverse_dower_matrix, rotation_matrix, vcg_augment,
    vcg_to_12lead, LEAD_NAMES,
};
pub use recording::MultiChannelRecording;
pub use xdawn::{fit_xdawn, xdawn_filters_from_covariances, FilterKind, SpatialFilter};

use crate::spd::SpdError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("recording has {channels} channels and {samples} samples; need at least 1 channel and 2 samples")]
    TooShort { channels: usize, samples: usize },
    #[error("recording contains NaN or infinite samples")]
    NonFinite,
    #[error("window of {window} samples exceeds recording length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("reference channel is identically zero; no R peak to align on")]
    EmptyRecording,
    #[error("channel {channel} out of range for {channels}-channel recording")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("filter expects {expected} input channels, recording has {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("recordings have unequal lengths ({expected} vs {found})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("parameter {name} = {value} is out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("covariance is not positive definite even after shrinkage: {0}")]
    DegenerateSignal(SpdError),
    #[error("pooled covariance is singular after regularization")]
    SingularPooledCovariance,
    #[error("need at least {needed} classes, found {found}")]
    TooFewClasses { needed: usize, found: usize },
    #[error("expected 12-lead input in standard order, got {0} channels")]
    WrongChannelCount(usize),
    #[error("rotation angle {0} degrees outside [-45, 45]")]
    AngleOutOfRange(f64),
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Spd(#[from] SpdError),
}
