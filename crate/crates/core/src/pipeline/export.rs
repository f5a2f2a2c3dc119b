use std::sync::atomic::AtomicU64;

use ndarray::Array1;
use rayon::prelude::*;

use super::fitted::{align_all, covariance};
use super::{flatten_series, FilterConfig, FitSeeds, PipelineConfig, PipelineError, TangentChoice};
use crate::augment::{augment_training_set, MixupConfig};
use crate::class::ClassId;
use crate::features::{fit_tangent, TangentMode};
use crate::signal::{fit_xdawn, MultiChannelRecording, SpatialFilter};
use crate::spd::{pack_upper, SpdSample};

/// One feature vector per recording, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dim: usize,
    pub rows: Vec<(String, ClassId, Array1<f64>)>,
}

/// The representation the classifier of `config.row` would see, fitted on
/// all recordings. Rotated copies and synthetic covariances only shape the
/// fitted base points; the table holds the real recordings.
pub fn feature_table(
    recordings: &[MultiChannelRecording<f64>],
    config: &PipelineConfig,
    seed: u64,
) -> Result<FeatureTable, PipelineError> {
    config.validate()?;
    if recordings.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let aligned = align_all(recordings, config)?;
    let flags = config.row.flags();
    let vectors: Vec<Array1<f64>> = if !flags.covariance {
        aligned.par_iter().map(|r| flatten_series(r, config.flatten_stride)).collect()
    } else {
        let filter = match config.filter {
            FilterConfig::Identity => SpatialFilter::identity(aligned[0].channels()),
            FilterConfig::Xdawn { filters_per_class } => fit_xdawn(&aligned, filters_per_class)?,
        };
        let counter = AtomicU64::new(0);
        let samples: Vec<SpdSample<f64>> = aligned
            .par_iter()
            .map(|r| Ok(SpdSample::labelled(covariance(r, &filter, config, &counter)?, r.label.clone())))
            .collect::<Result<_, PipelineError>>()?;
        let mode = match flags.tangent {
            TangentChoice::None => None,
            TangentChoice::Single => Some(TangentMode::Single),
            TangentChoice::Multiple => Some(TangentMode::Multiple),
        };
        match mode {
            None => samples.par_iter().map(|s| pack_upper(s.matrix.data())).collect(),
            Some(mode) => {
                let model = if flags.cov_mixup {
                    let mixup = MixupConfig { seed: FitSeeds::derive(seed).mixup, ..config.mixup.clone() };
                    fit_tangent(&augment_training_set(&samples, &mixup)?, mode, &config.karcher)?
                } else {
                    fit_tangent(&samples, mode, &config.karcher)?
                };
                samples.par_iter().map(|s| model.transform(&s.matrix)).collect::<Result<_, _>>()?
            }
        }
    };
    Ok(FeatureTable {
        dim: vectors.first().map_or(0, |v| v.len()),
        rows: aligned.into_iter().zip(vectors).map(|(r, v)| (r.patient_id, r.label, v)).collect(),
    })
}
