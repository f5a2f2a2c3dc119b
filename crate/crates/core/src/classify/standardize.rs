use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Per-feature affine map to zero mean and unit variance on the training set.
/// Constant features keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
pub struct Standardizer<T> {
    #[serde(with = "crate::nested::vector")]
    mean: Array1<T>,
    #[serde(with = "crate::nested::vector")]
    scale: Array1<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(x: &ArrayView2<T>) -> Self {
        let n = T::of(x.nrows().max(1) as f64);
        let mean = x.sum_axis(Axis(0)).mapv(|s| s / n);
        let mut var = Array1::<T>::zeros(x.ncols());
        for row in x.rows() {
            for ((v, &xi), &m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
                *v = *v + (xi - m) * (xi - m);
            }
        }
        let floor = T::of(1e-12);
        let scale = var.mapv(|v| {
            let sd = (v / n).sqrt();
            if sd > floor { sd } else { T::one() }
        });
        Standardizer { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &ArrayView1<T>) -> Array1<T> {
        (x - &self.mean) / &self.scale
    }

    pub fn apply_rows(&self, x: &ArrayView2<T>) -> Array2<T> {
        (x - &self.mean) / &self.scale
    }
}
