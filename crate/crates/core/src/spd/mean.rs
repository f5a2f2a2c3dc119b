use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::eig::frobenius_norm;
use super::functions::sym_expm_raw;
use super::metric::{geodesic, BasePoint};
use super::{SpdError, SpdMatrix, SpdSample};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KarcherConfig {
    pub max_iter: usize,
    /// Stop once `‖Σ w̄ᵢ log_map(C, Cᵢ)‖_F` drops to this value.
    pub tol: f64,
    /// Two samples have the geodesic as their exact weighted mean; skip the iteration.
    pub closed_form_pairs: bool,
}

impl Default for KarcherConfig {
    fn default() -> Self {
        KarcherConfig { max_iter: 64, tol: 1e-8, closed_form_pairs: true }
    }
}

/// Weighted Fréchet mean of labelled samples, using each sample's weight.
pub fn karcher_mean<T: Scalar>(samples: &[SpdSample<T>], config: &KarcherConfig) -> Result<SpdMatrix<T>, SpdError> {
    let points: Vec<&SpdMatrix<T>> = samples.iter().map(|s| &s.matrix).collect();
    let weights: Vec<T> = samples.iter().map(|s| s.weight).collect();
    weighted_karcher_mean(&points, &weights, config)
}

/// Minimizer of `Σ wᵢ d(C, Cᵢ)²` by the fixed-point iteration
/// `C ← exp_C(Σ w̄ᵢ log_C(Cᵢ))`, started at the weighted arithmetic mean.
pub fn weighted_karcher_mean<T: Scalar>(
    points: &[&SpdMatrix<T>],
    weights: &[T],
    config: &KarcherConfig,
) -> Result<SpdMatrix<T>, SpdError> {
    if points.is_empty() {
        return Err(SpdError::EmptyInput);
    }
    if weights.len() != points.len() {
        return Err(SpdError::DimensionMismatch { expected: points.len(), found: weights.len() });
    }
    let n = points[0].dim();
    for p in points {
        if p.dim() != n {
            return Err(SpdError::DimensionMismatch { expected: n, found: p.dim() });
        }
    }
    for (index, &w) in weights.iter().enumerate() {
        if !(w >= T::zero()) || !w.is_finite() {
            return Err(SpdError::InvalidWeight { index, weight: w.to_f64_lossy() });
        }
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(SpdError::ZeroTotalWeight);
    }

    let active: Vec<(&SpdMatrix<T>, T)> = points
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(p, &w)| (*p, w / total))
        .collect();

    if active.len() == 1 {
        return Ok(active[0].0.clone());
    }
    if active.len() == 2 && config.closed_form_pairs {
        let (a, _) = active[0];
        let (b, wb) = active[1];
        return geodesic(a, b, wb.min(T::one()));
    }

    let mut init = Array2::<T>::zeros((n, n));
    for (p, w) in &active {
        init.scaled_add(*w, p.data());
    }
    let mut current = SpdMatrix::from_symmetric(init)?;
    let tol = T::of(config.tol);
    let mut residual = T::infinity();
    for _ in 0..=config.max_iter {
        let base = BasePoint::new(current);
        let mut step = Array2::<T>::zeros((n, n));
        for (p, w) in &active {
            step.scaled_add(*w, &base.whitened_log(p)?);
        }
        residual = frobenius_norm(&base.unwhiten(&step));
        if residual <= tol {
            return Ok(base.point().clone());
        }
        let next = base.unwhiten(&sym_expm_raw(&step)?);
        current = SpdMatrix::from_symmetric(next)?;
    }
    Err(SpdError::DidNotConverge { max_iter: config.max_iter, residual: residual.to_f64_lossy() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{log_map, matrix_fn, MatrixFunction};
    use ndarray::array;
    use std::f64::consts::E;

    fn iterative() -> KarcherConfig {
        KarcherConfig { closed_form_pairs: false, tol: 1e-12, ..KarcherConfig::default() }
    }

    #[test]
    fn mean_of_identical_points() {
        let a = SpdMatrix::new(array![[2.0, 0.4], [0.4, 1.0]]).unwrap();
        let m = weighted_karcher_mean(&[&a, &a, &a], &[1.0, 1.0, 1.0], &KarcherConfig::default()).unwrap();
        assert!(frobenius_norm(&(m.data() - a.data())) < 1e-14);
        let m = weighted_karcher_mean(&[&a, &a], &[1.0, 1.0], &iterative()).unwrap();
        assert!(frobenius_norm(&(m.data() - a.data())) < 1e-14);
    }

    #[test]
    fn scalar_geometric_mean() {
        let one = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let e2 = SpdMatrix::from_diagonal(&[E * E]).unwrap();
        for cfg in [KarcherConfig::default(), iterative()] {
            let m = weighted_karcher_mean(&[&one, &e2], &[1.0, 1.0], &cfg).unwrap();
            assert!((m.data()[[0, 0]] - E).abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_diagonals_closed_form() {
        let ds = [[1.0, 2.0, 3.0], [0.5, 4.0, 1.0], [2.0, 0.25, 5.0], [1.5, 1.5, 0.1]];
        let w = [0.1, 0.4, 0.2, 0.3];
        let mats: Vec<SpdMatrix<f64>> = ds.iter().map(|d| SpdMatrix::from_diagonal(d).unwrap()).collect();
        let refs: Vec<&SpdMatrix<f64>> = mats.iter().collect();
        let m = weighted_karcher_mean(&refs, &w, &KarcherConfig::default()).unwrap();
        for i in 0..3 {
            let expected = ds.iter().zip(&w).map(|(d, wi)| wi * d[i].ln()).sum::<f64>().exp();
            assert!((m.data()[[i, i]] - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn stationarity_at_result() {
        let mats = [
            SpdMatrix::new(array![[2.0, 0.4, 0.0], [0.4, 1.0, 0.2], [0.0, 0.2, 0.5]]).unwrap(),
            SpdMatrix::new(array![[1.0, -0.2, 0.1], [-0.2, 3.0, 0.0], [0.1, 0.0, 1.0]]).unwrap(),
            SpdMatrix::new(array![[0.6, 0.1, 0.1], [0.1, 0.8, 0.3], [0.1, 0.3, 2.0]]).unwrap(),
        ];
        let refs: Vec<&SpdMatrix<f64>> = mats.iter().collect();
        let cfg = KarcherConfig::default();
        let m = weighted_karcher_mean(&refs, &[1.0, 2.0, 3.0], &cfg).unwrap();
        let mut g = Array2::<f64>::zeros((3, 3));
        for (x, w) in mats.iter().zip([1.0, 2.0, 3.0]) {
            g.scaled_add(w / 6.0, &log_map(&m, x).unwrap());
        }
        assert!(frobenius_norm(&g) <= cfg.tol);
    }

    #[test]
    fn zero_weights_ignored_and_errors() {
        let a = SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let m = weighted_karcher_mean(&[&a, &b], &[1.0, 0.0], &KarcherConfig::default()).unwrap();
        assert_eq!(m, a);
        assert_eq!(
            weighted_karcher_mean::<f64>(&[], &[], &KarcherConfig::default()).unwrap_err(),
            SpdError::EmptyInput
        );
        assert_eq!(
            weighted_karcher_mean(&[&a, &b], &[0.0, 0.0], &KarcherConfig::default()).unwrap_err(),
            SpdError::ZeroTotalWeight
        );
        assert!(matches!(
            weighted_karcher_mean(&[&a, &b], &[1.0, -1.0], &KarcherConfig::default()),
            Err(SpdError::InvalidWeight { index: 1, .. })
        ));
        let c = SpdMatrix::<f64>::identity(3);
        assert!(matches!(
            weighted_karcher_mean(&[&a, &c], &[1.0, 1.0], &KarcherConfig::default()),
            Err(SpdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let mats: Vec<SpdMatrix<f64>> =
            (1..5).map(|k| SpdMatrix::from_diagonal(&[k as f64, 1.0 / k as f64]).unwrap()).collect();
        let refs: Vec<&SpdMatrix<f64>> = mats.iter().collect();
        let cfg = KarcherConfig { max_iter: 0, tol: 1e-300, closed_form_pairs: true };
        assert!(matches!(
            weighted_karcher_mean(&refs, &[1.0; 4], &cfg),
            Err(SpdError::DidNotConverge { max_iter: 0, .. })
        ));
    }

    #[test]
    fn samples_entry_point_uses_weights() {
        let one = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let e4 = SpdMatrix::from_diagonal(&[E.powi(4)]).unwrap();
        let samples = vec![
            SpdSample::new(one).with_weight(0.75).unwrap(),
            SpdSample::new(e4).with_weight(0.25).unwrap(),
        ];
        let m = karcher_mean(&samples, &KarcherConfig::default()).unwrap();
        assert!((m.data()[[0, 0]] - E).abs() < 1e-13);
        let logm = matrix_fn(&m, MatrixFunction::Log);
        assert!((logm[[0, 0]] - 1.0).abs() < 1e-13);
    }
}
