//! Classifiers: minimum distance to mean on the manifold, a one-vs-rest
//! linear SVM and a small multilayer perceptron on feature vectors.
//!
//! Every model keeps its classes in canonical (sorted) order; score vectors
//! follow that order and ties in the argmax go to the earlier class.

mod mdm;
mod mlp;
mod standardize;
mod svm;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mdm::{mdm_fit, MdmModel, NearestCentroid};
pub use mlp::{flatten, mlp_fit, Gradients, Layer, MlpConfig, MlpModel};
pub use standardize::Standardizer;
pub use svm::{svm_fit, LinearSvmModel, SvmConfig};

use crate::class::{canonical_classes, ClassId};
use crate::scalar::Scalar;
use crate::spd::SpdError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("class {0} has no training samples")]
    EmptyClass(ClassId),
    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("sample {0} has no label")]
    MissingLabel(usize),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// Predicted class with one score per class in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ClassId,
    pub scores: Vec<f64>,
}

/// Index of the largest score; the first one wins a tie.
pub fn argmax_first<T: PartialOrd + Copy>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exp: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Canonical classes of a labelled training set and each row's class index.
pub(crate) fn index_labels(labels: &[ClassId]) -> Result<(Vec<ClassId>, Vec<usize>), ClassifyError> {
    let classes = canonical_classes(labels);
    if classes.len() < 2 {
        return Err(ClassifyError::TooFewClasses(classes.len()));
    }
    let idx = labels.iter().map(|l| classes.binary_search(l).expect("label in class list")).collect();
    Ok((classes, idx))
}

pub(crate) fn check_training_set<T>(x: &ArrayView2<T>, labels: &[ClassId]) -> Result<(), ClassifyError> {
    if x.nrows() != labels.len() {
        return Err(ClassifyError::DimensionMismatch { expected: x.nrows(), found: labels.len() });
    }
    if x.ncols() == 0 {
        return Err(ClassifyError::InvalidConfig("feature vectors are empty".into()));
    }
    Ok(())
}

pub(crate) fn check_dim<T>(x: &Array1<T>, expected: usize) -> Result<(), ClassifyError> {
    if x.len() != expected {
        return Err(ClassifyError::DimensionMismatch { expected, found: x.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_first() {
        assert_eq!(argmax_first(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax_first(&[1.0, 1.0]), 0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 1001.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > p[0] && p[0] > p[2]);
    }
}
