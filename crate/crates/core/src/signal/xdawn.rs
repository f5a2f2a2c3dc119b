use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{MultiChannelRecording, SignalError};
use crate::class::ClassId;
use crate::scalar::Scalar;
use crate::spd::{cholesky, solve_lower, solve_lower_transpose, symmetric_eigen, symmetrize_in_place};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Identity,
    Xdawn,
}

/// Linear `m × c` map applied to every recording before covariance estimation.
/// Rows are unit-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de> + Clone"))]
pub struct SpatialFilter<T> {
    pub kind: FilterKind,
    #[serde(with = "crate::nested")]
    weights: Array2<T>,
}

impl<T: Scalar> SpatialFilter<T> {
    pub fn identity(channels: usize) -> Self {
        SpatialFilter { kind: FilterKind::Identity, weights: Array2::eye(channels) }
    }

    /// Normalizes each row to unit length; all-zero rows are rejected.
    pub fn from_weights(mut weights: Array2<T>, kind: FilterKind) -> Result<Self, SignalError> {
        for mut row in weights.rows_mut() {
            let norm = row.iter().map(|&x| x * x).sum::<T>().sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(SignalError::ParameterOutOfRange { name: "filter row norm", value: norm.to_f64_lossy() });
            }
            row.mapv_inplace(|x| x / norm);
        }
        Ok(SpatialFilter { kind, weights })
    }

    pub fn in_channels(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_channels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn apply(&self, samples: &Array2<T>) -> Array2<T> {
        match self.kind {
            FilterKind::Identity if self.weights.nrows() == self.weights.ncols() => samples.clone(),
            _ => self.weights.dot(samples),
        }
    }
}

/// Solves `Σ_k·w = λ·Σ_x·w` through the Cholesky factor of `Σ_x`.
/// Returns eigenvalues in descending order and `Σ_x`-orthonormal eigenvectors as columns.
pub fn generalized_eigen<T: Scalar>(
    sigma_k: &Array2<T>,
    sigma_x: &Array2<T>,
) -> Result<(Array1<T>, Array2<T>), SignalError> {
    let l = cholesky(sigma_x.view()).ok_or(SignalError::SingularPooledCovariance)?;
    let half = solve_lower(&l, sigma_k);
    let mut reduced = solve_lower(&l, &half.t().to_owned());
    symmetrize_in_place(&mut reduced);
    let eig = symmetric_eigen(reduced.view()).map_err(|_| SignalError::SingularPooledCovariance)?;
    let vectors = solve_lower_transpose(&l, &eig.vectors);
    Ok((eig.values, vectors))
}

/// Stacks the top `n_filters_per_class` generalized eigenvectors of each
/// `(evoked, pooled)` pair, in the given order.
pub fn xdawn_filters_from_covariances<T: Scalar>(
    evoked: &[Array2<T>],
    pooled: &Array2<T>,
    n_filters_per_class: usize,
) -> Result<SpatialFilter<T>, SignalError> {
    let c = pooled.nrows();
    if n_filters_per_class == 0 || n_filters_per_class > c {
        return Err(SignalError::ParameterOutOfRange {
            name: "n_filters_per_class",
            value: n_filters_per_class as f64,
        });
    }
    let mut regularized = pooled.clone();
    let bump = T::of(1e-8) * pooled.diag().sum();
    for i in 0..c {
        regularized[[i, i]] = regularized[[i, i]] + bump;
    }
    let mut weights = Array2::<T>::zeros((evoked.len() * n_filters_per_class, c));
    for (k, sigma_k) in evoked.iter().enumerate() {
        if sigma_k.dim() != (c, c) {
            return Err(SignalError::ChannelMismatch { expected: c, found: sigma_k.nrows() });
        }
        let (_, vectors) = generalized_eigen(sigma_k, &regularized)?;
        for f in 0..n_filters_per_class {
            let mut w = vectors.column(f).to_owned();
            orient(&mut w);
            weights.row_mut(k * n_filters_per_class + f).assign(&w);
        }
    }
    SpatialFilter::from_weights(weights, FilterKind::Xdawn)
}

// Deterministic sign: the largest-magnitude entry is positive.
fn orient<T: Scalar>(w: &mut Array1<T>) {
    let mut pivot = T::zero();
    for &x in w.iter() {
        if x.abs() > pivot.abs() {
            pivot = x;
        }
    }
    if pivot < T::zero() {
        w.mapv_inplace(|x| -x);
    }
}

/// Fits per-class xDAWN filters: the evoked covariance of each class-average
/// response against the pooled signal covariance. Classes are stacked in
/// canonical order, giving `K · n_filters_per_class` output channels.
pub fn fit_xdawn<T: Scalar>(
    recordings: &[MultiChannelRecording<T>],
    n_filters_per_class: usize,
) -> Result<SpatialFilter<T>, SignalError> {
    let first = recordings.first().ok_or(SignalError::TooFewClasses { needed: 2, found: 0 })?;
    let (c, len) = first.samples().dim();
    let mut sums: BTreeMap<&ClassId, (Array2<T>, usize)> = BTreeMap::new();
    let mut pooled = Array2::<T>::zeros((c, c));
    let denom = T::of((len - 1) as f64);
    for rec in recordings {
        if rec.channels() != c {
            return Err(SignalError::ChannelMismatch { expected: c, found: rec.channels() });
        }
        if rec.len() != len {
            return Err(SignalError::LengthMismatch { expected: len, found: rec.len() });
        }
        let entry = sums.entry(&rec.label).or_insert_with(|| (Array2::zeros((c, len)), 0));
        entry.0.scaled_add(T::one(), rec.samples());
        entry.1 += 1;
        pooled.scaled_add(T::one() / denom, &rec.samples().dot(&rec.samples().t()));
    }
    if sums.len() < 2 {
        return Err(SignalError::TooFewClasses { needed: 2, found: sums.len() });
    }
    pooled.mapv_inplace(|x| x / T::of(recordings.len() as f64));
    symmetrize_in_place(&mut pooled);
    let evoked: Vec<Array2<T>> = sums
        .into_values()
        .map(|(sum, count)| {
            let p = sum.mapv(|x| x / T::of(count as f64));
            let mut s = p.dot(&p.t()).mapv(|x| x / denom);
            symmetrize_in_place(&mut s);
            s
        })
        .collect();
    xdawn_filters_from_covariances(&evoked, &pooled, n_filters_per_class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{frobenius_norm, matrix_fn, symmetric_eigenvalues, MatrixFunction, SpdMatrix};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cov_pair() -> (Array2<f64>, Array2<f64>) {
        let sk = array![[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 0.2]];
        let sx = array![[3.0, 0.2, 0.4], [0.2, 2.0, -0.3], [0.4, -0.3, 1.5]];
        (sk, sx)
    }

    #[test]
    fn generalized_eigenvalues_match_symmetric_reduction() {
        let (sk, sx) = cov_pair();
        let (values, vectors) = generalized_eigen(&sk, &sx).unwrap();
        let sx_spd = SpdMatrix::new(sx.clone()).unwrap();
        let w = matrix_fn(&sx_spd, MatrixFunction::InvSqrt);
        let reduced = w.dot(&sk).dot(&w);
        let oracle = symmetric_eigenvalues(reduced.view()).unwrap();
        for (a, b) in values.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for j in 0..3 {
            let v = vectors.column(j).to_owned();
            let lhs = sk.dot(&v);
            let rhs = sx.dot(&v).mapv(|x| x * values[j]);
            assert!((&lhs - &rhs).iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn invariant_to_common_scaling() {
        let (sk, sx) = cov_pair();
        let (_, v1) = generalized_eigen(&sk, &sx).unwrap();
        let (_, v2) = generalized_eigen(&sk.mapv(|x| 7.5 * x), &sx.mapv(|x| 7.5 * x)).unwrap();
        for j in 0..3 {
            let a = v1.column(j).to_owned();
            let b = v2.column(j).to_owned();
            let cos = a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt());
            assert!((cos.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_class_full_rank_spans_space() {
        let (_, sx) = cov_pair();
        let sk = sx.mapv(|x| 0.3 * x);
        let f = xdawn_filters_from_covariances(&[sk], &sx, 3).unwrap();
        assert_eq!(f.out_channels(), 3);
        let g = f.weights().dot(&f.weights().t());
        let spd = SpdMatrix::new(g).unwrap();
        assert!(spd.eig().min_value() > 1e-6);
        for row in f.weights().rows() {
            assert!((row.dot(&row) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn recovers_planted_subspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (c, len) = (6usize, 200usize);
        let wave: Vec<f64> = (0..len).map(|t| (t as f64 / 9.0).sin() * 3.0).collect();
        let mut recs = Vec::new();
        for r in 0..40 {
            let label = if r % 2 == 0 { "A" } else { "B" };
            let mut s: Array2<f64> = Array2::from_shape_fn((c, len), |_| StandardNormal.sample(&mut rng));
            let channels: [usize; 2] = if label == "A" { [0, 1] } else { [2, 3] };
            for t in 0..len {
                s[[channels[0], t]] += wave[t];
                s[[channels[1], t]] += 0.5 * wave[t];
            }
            recs.push(MultiChannelRecording::new(format!("p{r}"), ClassId::new(label), s, 500.0).unwrap());
        }
        let f = fit_xdawn(&recs, 1).unwrap();
        assert_eq!(f.out_channels(), 2);
        let a = f.weights().row(0);
        let b = f.weights().row(1);
        let in_a = (a[0] * a[0] + a[1] * a[1]).sqrt();
        let in_b = (b[2] * b[2] + b[3] * b[3]).sqrt();
        assert!(in_a >= 0.99, "class A filter off its subspace: {in_a}");
        assert!(in_b >= 0.99, "class B filter off its subspace: {in_b}");
    }

    #[test]
    fn errors() {
        let rec = MultiChannelRecording::new("p", ClassId::new("A"), array![[1.0, 2.0], [0.5, 0.1]], 500.0).unwrap();
        assert!(matches!(fit_xdawn(&[rec.clone()], 1), Err(SignalError::TooFewClasses { found: 1, .. })));
        let (sk, _) = cov_pair();
        assert!(matches!(
            xdawn_filters_from_covariances(&[sk.clone()], &Array2::zeros((3, 3)), 1),
            Err(SignalError::SingularPooledCovariance)
        ));
        assert!(xdawn_filters_from_covariances(&[sk.clone()], &sk, 4).is_err());
    }

    #[test]
    fn identity_filter_passes_through() {
        let f = SpatialFilter::<f64>::identity(3);
        let y = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(f.apply(&y), y);
        let weighted = SpatialFilter::from_weights(array![[3.0, 4.0, 0.0]], FilterKind::Xdawn).unwrap();
        assert!(frobenius_norm(&(weighted.weights() - &array![[0.6, 0.8, 0.0]])) < 1e-15);
    }
}
