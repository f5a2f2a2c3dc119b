//! Tangent-space feature extraction at one global base point or at one base
//! point per class, with the per-class blocks concatenated.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::class::{canonical_classes, ClassId};
use crate::scalar::Scalar;
use crate::spd::{packed_len, weighted_karcher_mean, BasePoint, KarcherConfig, SpdError, SpdMatrix, SpdSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentMode {
    Single,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseLabel {
    Global,
    Class(ClassId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("no training samples")]
    EmptyInput,
    #[error("class {0} has no training samples")]
    EmptyClass(ClassId),
    #[error("sample {0} has no label; multiple tangent spaces need labels")]
    MissingLabel(usize),
    #[error(transparent)]
    Spd(#[from] SpdError),
}

#[derive(Debug, Clone)]
pub struct TangentSpaceModel<T: Scalar> {
    mode: TangentMode,
    bases: Vec<(BaseLabel, BasePoint<T>)>,
}

/// Fits base points on the classes present in `samples`.
pub fn fit_tangent<T: Scalar>(
    samples: &[SpdSample<T>],
    mode: TangentMode,
    karcher: &KarcherConfig,
) -> Result<TangentSpaceModel<T>, FeatureError> {
    match mode {
        TangentMode::Single => fit_tangent_for_classes(samples, mode, &[], karcher),
        TangentMode::Multiple => {
            let mut labels = Vec::with_capacity(samples.len());
            for (i, s) in samples.iter().enumerate() {
                labels.push(s.label.as_ref().ok_or(FeatureError::MissingLabel(i))?);
            }
            let classes = canonical_classes(labels);
            fit_tangent_for_classes(samples, mode, &classes, karcher)
        }
    }
}

/// Like [`fit_tangent`], but multiple mode gets one block per entry of
/// `classes` (sorted before use) and fails if any of them has no samples.
/// Sample weights are ignored; every mean is unweighted.
pub fn fit_tangent_for_classes<T: Scalar>(
    samples: &[SpdSample<T>],
    mode: TangentMode,
    classes: &[ClassId],
    karcher: &KarcherConfig,
) -> Result<TangentSpaceModel<T>, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let bases = match mode {
        TangentMode::Single => {
            let points: Vec<&SpdMatrix<T>> = samples.iter().map(|s| &s.matrix).collect();
            vec![(BaseLabel::Global, BasePoint::new(unweighted_mean(&points, karcher)?))]
        }
        TangentMode::Multiple => {
            let classes = canonical_classes(classes);
            let groups: Vec<(ClassId, Vec<&SpdMatrix<T>>)> = classes
                .into_iter()
                .map(|c| {
                    let members: Vec<&SpdMatrix<T>> =
                        samples.iter().filter(|s| s.label.as_ref() == Some(&c)).map(|s| &s.matrix).collect();
                    (c, members)
                })
                .collect();
            if let Some((c, _)) = groups.iter().find(|(_, m)| m.is_empty()) {
                return Err(FeatureError::EmptyClass(c.clone()));
            }
            if groups.is_empty() {
                return Err(FeatureError::EmptyInput);
            }
            groups
                .into_par_iter()
                .map(|(c, members)| Ok((BaseLabel::Class(c), BasePoint::new(unweighted_mean(&members, karcher)?))))
                .collect::<Result<Vec<_>, FeatureError>>()?
        }
    };
    TangentSpaceModel::from_bases(mode, bases)
}

fn unweighted_mean<T: Scalar>(points: &[&SpdMatrix<T>], karcher: &KarcherConfig) -> Result<SpdMatrix<T>, SpdError> {
    weighted_karcher_mean(points, &vec![T::one(); points.len()], karcher)
}

impl<T: Scalar> TangentSpaceModel<T> {
    pub fn from_bases(mode: TangentMode, bases: Vec<(BaseLabel, BasePoint<T>)>) -> Result<Self, FeatureError> {
        let first = bases.first().ok_or(FeatureError::EmptyInput)?;
        let n = first.1.dim();
        for (_, b) in &bases {
            if b.dim() != n {
                return Err(SpdError::DimensionMismatch { expected: n, found: b.dim() }.into());
            }
        }
        Ok(TangentSpaceModel { mode, bases })
    }

    pub fn mode(&self) -> TangentMode {
        self.mode
    }

    pub fn matrix_dim(&self) -> usize {
        self.bases[0].1.dim()
    }

    pub fn block_len(&self) -> usize {
        packed_len(self.matrix_dim())
    }

    pub fn feature_dim(&self) -> usize {
        self.bases.len() * self.block_len()
    }

    pub fn base_points(&self) -> impl Iterator<Item = (&BaseLabel, &SpdMatrix<T>)> {
        self.bases.iter().map(|(l, b)| (l, b.point()))
    }

    /// Feature vector of `x`; never looks at any label.
    pub fn transform(&self, x: &SpdMatrix<T>) -> Result<Array1<T>, SpdError> {
        let block = self.block_len();
        let mut out = Array1::zeros(self.feature_dim());
        for (k, (_, base)) in self.bases.iter().enumerate() {
            let v = base.vectorize(x)?;
            out.slice_mut(ndarray::s![k * block..(k + 1) * block]).assign(&v);
        }
        Ok(out)
    }

    /// Rows are the feature vectors of `xs`, in order.
    pub fn transform_many(&self, xs: &[&SpdMatrix<T>]) -> Result<Array2<T>, SpdError> {
        let mut out = Array2::zeros((xs.len(), self.feature_dim()));
        for (row, x) in xs.iter().enumerate() {
            out.row_mut(row).assign(&self.transform(x)?);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredBase<T: Scalar> {
    label: BaseLabel,
    matrix: SpdMatrix<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct StoredModel<T: Scalar> {
    mode: TangentMode,
    base_points: Vec<StoredBase<T>>,
}

impl<T: Scalar + Serialize> Serialize for TangentSpaceModel<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let stored = StoredModel {
            mode: self.mode,
            base_points: self
                .bases
                .iter()
                .map(|(label, b)| StoredBase { label: label.clone(), matrix: b.point().clone() })
                .collect(),
        };
        stored.serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for TangentSpaceModel<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let stored = StoredModel::<T>::deserialize(deserializer)?;
        let bases = stored.base_points.into_iter().map(|b| (b.label, BasePoint::new(b.matrix))).collect();
        TangentSpaceModel::from_bases(stored.mode, bases).map_err(D::Error::custom)
    }
}
