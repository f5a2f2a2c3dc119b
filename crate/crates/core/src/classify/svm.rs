use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax_first, check_dim, check_training_set, index_labels, ClassifyError, Prediction, Standardizer};
use crate::class::ClassId;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Inverse regularization: the L2 weight is `λ = 1 / (reg_c · n)`.
    pub reg_c: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { reg_c: 1.0, epochs: 30, batch_size: 8, standardize: true, seed: 0 }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.reg_c > 0.0) || !self.reg_c.is_finite() {
            return Err(ClassifyError::InvalidConfig(format!("reg_c must be positive, got {}", self.reg_c)));
        }
        if self.batch_size == 0 {
            return Err(ClassifyError::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// One-vs-rest linear scorers `w_k · x + b_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
pub struct LinearSvmModel<T> {
    classes: Vec<ClassId>,
    #[serde(with = "crate::nested")]
    weights: Array2<T>,
    #[serde(with = "crate::nested::vector")]
    biases: Array1<T>,
    standardizer: Option<Standardizer<T>>,
    pub config: SvmConfig,
    /// Primal objective of the averaged iterate after each epoch, per class.
    pub objective_history: Vec<Vec<f64>>,
}

/// Pegasos-style stochastic subgradient descent on
/// `λ/2 ‖w‖² + mean(max(0, 1 − y·(w·x + b)))`, with the bias folded in as a
/// constant input, projection onto the ball of radius `1/√λ`, and the
/// running average of the iterates as the returned scorer.
pub fn svm_fit<T: Scalar>(
    x: &ArrayView2<T>,
    labels: &[ClassId],
    config: &SvmConfig,
) -> Result<LinearSvmModel<T>, ClassifyError> {
    config.validate()?;
    check_training_set(x, labels)?;
    let (classes, idx) = index_labels(labels)?;
    let standardizer = config.standardize.then(|| Standardizer::fit(x));
    let z = match &standardizer {
        Some(s) => s.apply_rows(x),
        None => x.to_owned(),
    };
    let (n, d) = z.dim();
    let lambda = 1.0 / (config.reg_c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut weights = Array2::<T>::zeros((classes.len(), d));
    let mut biases = Array1::<T>::zeros(classes.len());
    let mut history = Vec::with_capacity(classes.len());

    for k in 0..classes.len() {
        let y: Vec<f64> = idx.iter().map(|&i| if i == k { 1.0 } else { -1.0 }).collect();
        let mut rng = stream_rng(config.seed, k as u64);
        let mut order: Vec<usize> = (0..n).collect();
        let mut w = vec![0.0f64; d + 1];
        let mut avg = vec![0.0f64; d + 1];
        let mut step = vec![0.0f64; d + 1];
        let mut t = 0usize;
        let mut objectives = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                step.iter_mut().for_each(|s| *s = 0.0);
                for &i in batch {
                    let row = z.row(i);
                    if y[i] * augmented_dot(&w, &row) < 1.0 {
                        for (s, &v) in step.iter_mut().zip(row.iter()) {
                            *s += y[i] * v.to_f64_lossy();
                        }
                        step[d] += y[i];
                    }
                }
                let shrink = 1.0 - eta * lambda;
                let gain = eta / batch.len() as f64;
                for (wj, sj) in w.iter_mut().zip(&step) {
                    *wj = shrink * *wj + gain * sj;
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    w.iter_mut().for_each(|v| *v *= radius / norm);
                }
                let tf = t as f64;
                for (a, &wj) in avg.iter_mut().zip(&w) {
                    *a += (wj - *a) / tf;
                }
            }
            objectives.push(primal_objective(&avg, &z.view(), &y, lambda));
        }
        for j in 0..d {
            weights[[k, j]] = T::of(avg[j]);
        }
        biases[k] = T::of(avg[d]);
        history.push(objectives);
    }
    Ok(LinearSvmModel { classes, weights, biases, standardizer, config: config.clone(), objective_history: history })
}

fn augmented_dot<T: Scalar>(w: &[f64], row: &ArrayView1<T>) -> f64 {
    let d = row.len();
    row.iter().zip(&w[..d]).map(|(&v, &wj)| v.to_f64_lossy() * wj).sum::<f64>() + w[d]
}

/// `λ/2 ‖w‖² + mean hinge`, with the bias counted in `w`.
pub(crate) fn primal_objective<T: Scalar>(w: &[f64], z: &ArrayView2<T>, y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = z.rows().into_iter().zip(y).map(|(row, &yi)| (1.0 - yi * augmented_dot(w, &row)).max(0.0)).sum();
    reg + hinge / z.nrows() as f64
}

impl<T: Scalar> LinearSvmModel<T> {
    /// A model with explicit weights (`K × d`) and biases, no standardization.
    pub fn from_parts(classes: Vec<ClassId>, weights: Array2<T>, biases: Array1<T>) -> Result<Self, ClassifyError> {
        if classes.len() < 2 || weights.nrows() != classes.len() || biases.len() != classes.len() {
            return Err(ClassifyError::InvalidConfig("one weight row and bias per class, at least 2 classes".into()));
        }
        Ok(LinearSvmModel {
            classes,
            weights,
            biases,
            standardizer: None,
            config: SvmConfig { standardize: false, ..SvmConfig::default() },
            objective_history: Vec::new(),
        })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<T> {
        &self.biases
    }

    pub fn margins(&self, x: &Array1<T>) -> Result<Vec<T>, ClassifyError> {
        check_dim(x, self.weights.ncols())?;
        let z = match &self.standardizer {
            Some(s) => s.apply(&x.view()),
            None => x.clone(),
        };
        Ok((self.weights.dot(&z) + &self.biases).to_vec())
    }

    /// Largest margin wins; scores are the raw margins.
    pub fn predict(&self, x: &Array1<T>) -> Result<Prediction, ClassifyError> {
        let m = self.margins(x)?;
        let k = argmax_first(&m);
        Ok(Prediction { class: self.classes[k].clone(), scores: m.iter().map(|v| v.to_f64_lossy()).collect() })
    }
}
