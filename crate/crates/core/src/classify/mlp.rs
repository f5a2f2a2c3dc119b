use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{argmax_first, check_dim, check_training_set, index_labels, softmax, ClassifyError, Prediction, Standardizer};
use crate::class::ClassId;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![128],
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 300,
            batch_size: 32,
            standardize: true,
            seed: 0,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: String| Err(ClassifyError::InvalidConfig(m));
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }
}

/// Affine layer `a ↦ a·Wᵀ + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
pub struct Layer<T> {
    #[serde(with = "crate::nested")]
    pub weights: Array2<T>,
    #[serde(with = "crate::nested::vector")]
    pub bias: Array1<T>,
}

/// Same shapes as the model's layers.
pub type Gradients<T> = Vec<Layer<T>>;

/// ReLU hidden layers, softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
pub struct MlpModel<T> {
    classes: Vec<ClassId>,
    pub layers: Vec<Layer<T>>,
    standardizer: Option<Standardizer<T>>,
    pub config: MlpConfig,
    /// Mean training cross-entropy before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Mini-batch SGD with momentum on mean cross-entropy. Shuffling and
/// initialization draw from streams of `config.seed`, so a fit is reproducible.
pub fn mlp_fit<T: Scalar>(x: &ArrayView2<T>, labels: &[ClassId], config: &MlpConfig) -> Result<MlpModel<T>, ClassifyError> {
    config.validate()?;
    check_training_set(x, labels)?;
    let (classes, y) = index_labels(labels)?;
    let mut model = MlpModel::initialize(x.ncols(), classes, config)?;
    if config.standardize {
        model.standardizer = Some(Standardizer::fit(x));
    }
    let z = match &model.standardizer {
        Some(s) => s.apply_rows(x),
        None => x.to_owned(),
    };
    model.initial_loss = model.loss_and_gradient(&z.view(), &y).0.to_f64_lossy();

    let lr = T::of(config.learning_rate);
    let mu = T::of(config.momentum);
    let mut velocity: Gradients<T> = model
        .layers
        .iter()
        .map(|l| Layer { weights: Array2::zeros(l.weights.raw_dim()), bias: Array1::zeros(l.bias.len()) })
        .collect();
    let mut rng = stream_rng(config.seed, 1);
    let mut order: Vec<usize> = (0..z.nrows()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xb = z.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (_, grads) = model.loss_and_gradient(&xb.view(), &yb);
            for ((layer, v), g) in model.layers.iter_mut().zip(velocity.iter_mut()).zip(grads) {
                v.weights.zip_mut_with(&g.weights, |vi, &gi| *vi = mu * *vi - lr * gi);
                v.bias.zip_mut_with(&g.bias, |vi, &gi| *vi = mu * *vi - lr * gi);
                layer.weights += &v.weights;
                layer.bias += &v.bias;
            }
        }
    }
    model.final_loss = if config.epochs == 0 {
        model.initial_loss
    } else {
        model.loss_and_gradient(&z.view(), &y).0.to_f64_lossy()
    };
    Ok(model)
}

impl<T: Scalar> MlpModel<T> {
    /// Untrained network: He-normal hidden layers, `N(0, 1/fan_in)` output
    /// layer, zero biases, drawn from stream 0 of `config.seed`.
    pub fn initialize(input_dim: usize, classes: Vec<ClassId>, config: &MlpConfig) -> Result<Self, ClassifyError> {
        config.validate()?;
        if classes.len() < 2 {
            return Err(ClassifyError::TooFewClasses(classes.len()));
        }
        let mut sizes = vec![input_dim];
        sizes.extend(&config.hidden);
        sizes.push(classes.len());
        let mut rng = stream_rng(config.seed, 0);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { 1.0 } else { 2.0 };
                let normal = Normal::new(0.0, (gain / w[0] as f64).sqrt()).expect("finite std");
                Layer {
                    weights: Array2::from_shape_simple_fn((w[1], w[0]), || T::of(normal.sample(&mut rng))),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(MlpModel { classes, layers, standardizer: None, config: config.clone(), initial_loss: f64::NAN, final_loss: f64::NAN })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    /// Layer widths from input to output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    /// Pre-softmax outputs for rows of already standardized input.
    pub fn logits(&self, z: &ArrayView2<T>) -> Array2<T> {
        let mut a = z.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.weights.t()) + &layer.bias;
            if i + 1 < self.layers.len() {
                a.mapv_inplace(|v| v.max(T::zero()));
            }
        }
        a
    }

    /// Mean cross-entropy over the rows of `z` (network inputs, after any
    /// standardization) and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, z: &ArrayView2<T>, y: &[usize]) -> (T, Gradients<T>) {
        let n = T::of(z.nrows() as f64);
        let mut activations = vec![z.to_owned()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = activations[i].dot(&layer.weights.t()) + &layer.bias;
            if i + 1 < self.layers.len() {
                h.mapv_inplace(|v| v.max(T::zero()));
            }
            activations.push(h);
        }
        let logits = activations.pop().expect("output layer");
        let mut delta = Array2::<T>::zeros(logits.raw_dim());
        let mut loss = T::zero();
        for (r, (row, &label)) in logits.rows().into_iter().zip(y).enumerate() {
            let p = softmax(row.as_slice().expect("standard layout"));
            loss = loss - p[label].max(T::min_positive_value()).ln();
            for (k, pk) in p.into_iter().enumerate() {
                delta[[r, k]] = (pk - if k == label { T::one() } else { T::zero() }) / n;
            }
        }
        let mut grads: Vec<Layer<T>> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &activations[i];
            grads.push(Layer { weights: delta.t().dot(input), bias: delta.sum_axis(Axis(0)) });
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                back.zip_mut_with(input, |d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        (loss / n, grads)
    }

    /// Class probabilities in canonical class order.
    pub fn predict_proba(&self, x: &Array1<T>) -> Result<Vec<T>, ClassifyError> {
        check_dim(x, self.input_dim())?;
        let z = match &self.standardizer {
            Some(s) => s.apply(&x.view()),
            None => x.clone(),
        };
        let logits = self.logits(&z.view().insert_axis(Axis(0)));
        Ok(softmax(logits.row(0).as_slice().expect("standard layout")))
    }

    pub fn predict(&self, x: &Array1<T>) -> Result<Prediction, ClassifyError> {
        let p = self.predict_proba(x)?;
        let k = argmax_first(&p);
        Ok(Prediction { class: self.classes[k].clone(), scores: p.iter().map(|v| v.to_f64_lossy()).collect() })
    }

    /// All parameters, layer by layer, weights row-major then bias.
    pub fn parameters(&self) -> Vec<T> {
        flatten(&self.layers)
    }

    pub fn set_parameters(&mut self, params: &[T]) {
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            layer.weights.iter_mut().chain(layer.bias.iter_mut()).for_each(|p| *p = it.next().expect("parameter count"));
        }
    }
}

/// Gradients in the same order as [`MlpModel::parameters`].
pub fn flatten<T: Scalar>(layers: &[Layer<T>]) -> Vec<T> {
    layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<ClassId>) {
        let mut rng = stream_rng(seed, 9);
        let mut x = Array2::zeros((n, 2));
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { (-2.0, -1.0) } else { (2.0, 1.5) };
            x[[i, 0]] = centre.0 + rng.random_range(-0.8..0.8);
            x[[i, 1]] = centre.1 + rng.random_range(-0.8..0.8);
            labels.push(ClassId::new(if c == 0 { "A" } else { "B" }));
        }
        (x, labels)
    }

    #[test]
    fn separates_blobs() {
        let (x, labels) = blobs(60, 1);
        let cfg = MlpConfig { epochs: 200, ..MlpConfig::default() };
        let m = mlp_fit(&x.view(), &labels, &cfg).unwrap();
        let correct = x.rows().into_iter().zip(&labels).filter(|(r, l)| m.predict(&r.to_owned()).unwrap().class == **l).count();
        assert_eq!(correct, 60);
        assert!(m.final_loss <= m.initial_loss);
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let (x, labels) = blobs(10, 2);
        let cfg = MlpConfig { epochs: 0, standardize: false, hidden: vec![5], seed: 4, ..MlpConfig::default() };
        let m = mlp_fit(&x.view(), &labels, &cfg).unwrap();
        let init = MlpModel::<f64>::initialize(2, vec!["A".into(), "B".into()], &cfg).unwrap();
        assert_eq!(m.layers, init.layers);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut m = MlpModel::<f64>::initialize(3, vec!["A".into(), "B".into(), "C".into()], &MlpConfig::default()).unwrap();
        let last = m.layers.last_mut().unwrap();
        last.weights.fill(0.0);
        let p = m.predict_proba(&Array1::from(vec![0.3, -1.0, 2.0])).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(m.predict(&Array1::from(vec![0.3, -1.0, 2.0])).unwrap().class.as_str(), "A");
    }

    #[test]
    fn probabilities_normalized_and_argmax_matches_logits() {
        let m = MlpModel::<f64>::initialize(4, vec!["A".into(), "B".into(), "C".into()], &MlpConfig { hidden: vec![6, 5], ..MlpConfig::default() }).unwrap();
        let mut rng = stream_rng(7, 0);
        for _ in 0..20 {
            let x = Array1::from_shape_simple_fn(4, || rng.random_range(-3.0..3.0));
            let p = m.predict_proba(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let logits = m.logits(&x.view().insert_axis(Axis(0)));
            assert_eq!(argmax_first(&p), argmax_first(logits.row(0).as_slice().unwrap()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut m = MlpModel::<f64>::initialize(3, vec!["A".into(), "B".into(), "C".into()], &MlpConfig { hidden: vec![4], seed: 2, ..MlpConfig::default() }).unwrap();
        let mut rng = stream_rng(11, 0);
        for layer in &mut m.layers {
            layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let z = Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0));
        let y = [0usize, 2, 1];
        let (_, grads) = m.loss_and_gradient(&z.view(), &y);
        let analytic = flatten(&grads);
        let base = m.parameters();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            m.set_parameters(&p);
            let up = m.loss_and_gradient(&z.view(), &y).0;
            p[i] -= 2.0 * h;
            m.set_parameters(&p);
            let down = m.loss_and_gradient(&z.view(), &y).0;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-8);
            assert!((analytic[i] - numeric).abs() / scale < 1e-5 || (analytic[i] - numeric).abs() < 1e-9, "param {i}: {} vs {numeric}", analytic[i]);
        }
    }

    #[test]
    fn deterministic_and_validates() {
        let (x, labels) = blobs(20, 3);
        let cfg = MlpConfig { epochs: 5, hidden: vec![8], ..MlpConfig::default() };
        assert_eq!(mlp_fit(&x.view(), &labels, &cfg).unwrap(), mlp_fit(&x.view(), &labels, &cfg).unwrap());
        assert!(mlp_fit(&x.view(), &labels, &MlpConfig { momentum: 1.0, ..cfg.clone() }).is_err());
        assert!(mlp_fit(&x.view(), &labels[..5], &cfg).is_err());
        let m = mlp_fit(&x.view(), &labels, &cfg).unwrap();
        assert!(m.predict(&Array1::zeros(3)).is_err());
        assert_eq!(m.layer_sizes(), vec![2, 8, 2]);
    }

    #[test]
    fn json_round_trip() {
        let (x, labels) = blobs(20, 3);
        let m = mlp_fit(&x.view(), &labels, &MlpConfig { epochs: 3, hidden: vec![4], ..MlpConfig::default() }).unwrap();
        let back: MlpModel<f64> = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        let probe = Array1::from(vec![0.1, 0.2]);
        let (a, b) = (m.predict_proba(&probe).unwrap(), back.predict_proba(&probe).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}
