use ndarray::{Array1, Array2, ArrayView2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{argmax_first, check_dim, check_training_set, index_labels, softmax, ClassifyError, Prediction};
use crate::class::{canonical_classes, ClassId};
use crate::scalar::Scalar;
use crate::spd::{weighted_karcher_mean, BasePoint, KarcherConfig, SpdMatrix, SpdSample};

/// Minimum distance to mean: one Riemannian centroid per class.
#[derive(Debug, Clone)]
pub struct MdmModel<T: Scalar> {
    classes: Vec<ClassId>,
    centroids: Vec<BasePoint<T>>,
}

/// Centroid of each class is the unweighted Karcher mean of its samples.
pub fn mdm_fit<T: Scalar>(samples: &[SpdSample<T>], karcher: &KarcherConfig) -> Result<MdmModel<T>, ClassifyError> {
    let mut labels = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        labels.push(s.label.as_ref().ok_or(ClassifyError::MissingLabel(i))?);
    }
    let classes = canonical_classes(labels);
    if classes.len() < 2 {
        return Err(ClassifyError::TooFewClasses(classes.len()));
    }
    let mut centroids = Vec::with_capacity(classes.len());
    for c in &classes {
        let members: Vec<&SpdMatrix<T>> =
            samples.iter().filter(|s| s.label.as_ref() == Some(c)).map(|s| &s.matrix).collect();
        let mean = weighted_karcher_mean(&members, &vec![T::one(); members.len()], karcher)?;
        centroids.push(mean);
    }
    MdmModel::new(classes, centroids)
}

impl<T: Scalar> MdmModel<T> {
    /// `classes` must be sorted and match `centroids` one to one.
    pub fn new(classes: Vec<ClassId>, centroids: Vec<SpdMatrix<T>>) -> Result<Self, ClassifyError> {
        if classes.len() < 2 || classes.len() != centroids.len() {
            return Err(ClassifyError::TooFewClasses(classes.len().min(centroids.len())));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ClassifyError::InvalidConfig("MDM classes must be unique and sorted".into()));
        }
        let n = centroids[0].dim();
        if let Some(c) = centroids.iter().find(|c| c.dim() != n) {
            return Err(ClassifyError::DimensionMismatch { expected: n, found: c.dim() });
        }
        Ok(MdmModel { classes, centroids: centroids.into_iter().map(BasePoint::new).collect() })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn centroid(&self, k: usize) -> &SpdMatrix<T> {
        self.centroids[k].point()
    }

    pub fn distances(&self, x: &SpdMatrix<T>) -> Result<Vec<T>, ClassifyError> {
        Ok(self.centroids.iter().map(|c| c.distance_to(x)).collect::<Result<_, _>>()?)
    }

    /// Nearest centroid; scores are the softmax of negated distances.
    pub fn predict(&self, x: &SpdMatrix<T>) -> Result<Prediction, ClassifyError> {
        let neg: Vec<T> = self.distances(x)?.into_iter().map(|d| -d).collect();
        let k = argmax_first(&neg);
        Ok(Prediction {
            class: self.classes[k].clone(),
            scores: softmax(&neg).into_iter().map(|p| p.to_f64_lossy()).collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct StoredMdm<T: Scalar> {
    classes: Vec<ClassId>,
    centroids: Vec<SpdMatrix<T>>,
}

impl<T: Scalar + Serialize> Serialize for MdmModel<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StoredMdm { classes: self.classes.clone(), centroids: self.centroids.iter().map(|c| c.point().clone()).collect() }
            .serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for MdmModel<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let stored = StoredMdm::<T>::deserialize(deserializer)?;
        MdmModel::new(stored.classes, stored.centroids).map_err(D::Error::custom)
    }
}

/// Euclidean nearest class mean on feature vectors. This is what minimum
/// distance to mean becomes once matrices are flattened into a single
/// tangent space; scores are the softmax of negated distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
pub struct NearestCentroid<T> {
    classes: Vec<ClassId>,
    #[serde(with = "crate::nested")]
    centroids: Array2<T>,
}

impl<T: Scalar> NearestCentroid<T> {
    pub fn fit(x: &ArrayView2<T>, labels: &[ClassId]) -> Result<Self, ClassifyError> {
        check_training_set(x, labels)?;
        let (classes, idx) = index_labels(labels)?;
        let mut centroids = Array2::<T>::zeros((classes.len(), x.ncols()));
        let mut counts = vec![0usize; classes.len()];
        for (row, &k) in x.rows().into_iter().zip(&idx) {
            let mut c = centroids.row_mut(k);
            c += &row;
            counts[k] += 1;
        }
        for (k, &n) in counts.iter().enumerate() {
            let n = T::of(n as f64);
            centroids.row_mut(k).mapv_inplace(|v| v / n);
        }
        Ok(NearestCentroid { classes, centroids })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn predict(&self, x: &Array1<T>) -> Result<Prediction, ClassifyError> {
        check_dim(x, self.centroids.ncols())?;
        let neg: Vec<T> = self
            .centroids
            .rows()
            .into_iter()
            .map(|c| -c.iter().zip(x.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt())
            .collect();
        let k = argmax_first(&neg);
        Ok(Prediction {
            class: self.classes[k].clone(),
            scores: softmax(&neg).into_iter().map(|p| p.to_f64_lossy()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::airm_distance;
    use ndarray::array;
    use std::f64::consts::E;

    fn scalar(x: f64, label: &str) -> SpdSample<f64> {
        SpdSample::labelled(SpdMatrix::from_diagonal(&[x]).unwrap(), ClassId::new(label))
    }

    fn d1(x: f64) -> SpdMatrix<f64> {
        SpdMatrix::from_diagonal(&[x]).unwrap()
    }

    #[test]
    fn one_sample_per_class() {
        let m = mdm_fit(&[scalar(3.0, "B"), scalar(0.5, "A")], &KarcherConfig::default()).unwrap();
        assert_eq!(m.classes()[0].as_str(), "A");
        assert_eq!(m.centroid(0).data()[[0, 0]], 0.5);
        assert_eq!(m.centroid(1).data()[[0, 0]], 3.0);
    }

    #[test]
    fn scalar_centroid_is_geometric_mean() {
        let s = vec![scalar(1.0, "A"), scalar(E * E, "A"), scalar(9.0, "B")];
        let m = mdm_fit(&s, &KarcherConfig::default()).unwrap();
        assert!((m.centroid(0).data()[[0, 0]] - E).abs() < 1e-12);
    }

    #[test]
    fn nearest_centroid_and_scores() {
        let m = MdmModel::new(vec!["A".into(), "B".into()], vec![d1(1.0), d1(E * E)]).unwrap();
        let p = m.predict(&d1(E.sqrt())).unwrap();
        assert_eq!(p.class.as_str(), "A");
        let d = m.distances(&d1(E.sqrt())).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 1.5).abs() < 1e-12);
        assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.scores[0] > p.scores[1]);
        let own = m.predict(&d1(E * E)).unwrap();
        assert_eq!(own.class.as_str(), "B");
        assert!(m.distances(&d1(E * E)).unwrap()[1].abs() < 1e-12);
    }

    #[test]
    fn equidistant_goes_to_first_class() {
        let m = MdmModel::new(vec!["A".into(), "B".into()], vec![d1(1.0), d1(4.0)]).unwrap();
        let d = m.distances(&d1(2.0)).unwrap();
        assert_eq!(d[0], d[1]);
        let p = m.predict(&d1(2.0)).unwrap();
        assert_eq!(p.class.as_str(), "A");
    }

    #[test]
    fn congruence_preserves_prediction() {
        let c0 = SpdMatrix::new(array![[2.0, 0.3], [0.3, 1.0]]).unwrap();
        let c1 = SpdMatrix::new(array![[1.0, -0.2], [-0.2, 3.0]]).unwrap();
        let x = SpdMatrix::new(array![[1.5, 0.1], [0.1, 1.2]]).unwrap();
        let w = array![[1.3, 0.4], [-0.7, 2.0]];
        let cong = |m: &SpdMatrix<f64>| SpdMatrix::new(w.dot(m.data()).dot(&w.t())).unwrap();
        let a = MdmModel::new(vec!["A".into(), "B".into()], vec![c0.clone(), c1.clone()]).unwrap();
        let b = MdmModel::new(vec!["A".into(), "B".into()], vec![cong(&c0), cong(&c1)]).unwrap();
        assert_eq!(a.predict(&x).unwrap().class, b.predict(&cong(&x)).unwrap().class);
        let (da, db) = (a.distances(&x).unwrap(), b.distances(&cong(&x)).unwrap());
        for k in 0..2 {
            assert!((da[k] - db[k]).abs() < 1e-10);
        }
        assert!((da[0] - airm_distance(&c0, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn errors_and_json() {
        assert_eq!(mdm_fit(&[scalar(1.0, "A")], &KarcherConfig::default()).unwrap_err(), ClassifyError::TooFewClasses(1));
        let m = mdm_fit(&[scalar(1.0, "A"), scalar(2.0, "B")], &KarcherConfig::default()).unwrap();
        assert!(m.predict(&SpdMatrix::identity(2)).is_err());
        let text = serde_json::to_string(&m).unwrap();
        let back: MdmModel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.predict(&d1(1.7)).unwrap(), m.predict(&d1(1.7)).unwrap());
    }

    #[test]
    fn euclidean_nearest_centroid() {
        let x = array![[0.0, 0.0], [0.0, 2.0], [4.0, 4.0], [6.0, 4.0]];
        let labels: Vec<ClassId> = ["B", "B", "A", "A"].iter().map(|&s| s.into()).collect();
        let m = NearestCentroid::fit(&x.view(), &labels).unwrap();
        assert_eq!(m.predict(&array![0.5, 0.5]).unwrap().class.as_str(), "B");
        assert_eq!(m.predict(&array![5.0, 3.0]).unwrap().class.as_str(), "A");
        assert!(m.predict(&array![1.0]).is_err());
    }
}
