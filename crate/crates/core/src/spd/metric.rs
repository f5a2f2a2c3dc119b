use ndarray::Array2;

use super::eig::symmetric_eigenvalues;
use super::functions::{ensure_symmetric, sym_expm_raw, sym_logm_raw};
use super::{SpdError, SpdMatrix};
use crate::scalar::Scalar;

/// A base point with its square root and inverse square root precomputed.
#[derive(Debug, Clone)]
pub struct BasePoint<T: Scalar> {
    point: SpdMatrix<T>,
    sqrt: Array2<T>,
    inv_sqrt: Array2<T>,
}

impl<T: Scalar> BasePoint<T> {
    pub fn new(point: SpdMatrix<T>) -> Self {
        let eig = point.eig();
        let sqrt = eig.reconstruct_with(|x| x.sqrt());
        let inv_sqrt = eig.reconstruct_with(|x| x.sqrt().recip());
        BasePoint { point, sqrt, inv_sqrt }
    }

    pub fn point(&self) -> &SpdMatrix<T> {
        &self.point
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    pub fn sqrt(&self) -> &Array2<T> {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &Array2<T> {
        &self.inv_sqrt
    }

    /// `B^{-1/2} X B^{-1/2}`.
    pub fn whiten(&self, x: &Array2<T>) -> Array2<T> {
        self.inv_sqrt.dot(x).dot(&self.inv_sqrt)
    }

    /// `B^{1/2} S B^{1/2}`.
    pub fn unwhiten(&self, s: &Array2<T>) -> Array2<T> {
        self.sqrt.dot(s).dot(&self.sqrt)
    }

    fn check(&self, other: &SpdMatrix<T>) -> Result<(), SpdError> {
        self.point.ensure_same_dim(other)
    }

    /// `log(B^{-1/2} X B^{-1/2})`: the log map expressed in whitened coordinates.
    pub fn whitened_log(&self, x: &SpdMatrix<T>) -> Result<Array2<T>, SpdError> {
        self.check(x)?;
        sym_logm_raw(&self.whiten(x.data()))
    }

    pub fn distance_to(&self, x: &SpdMatrix<T>) -> Result<T, SpdError> {
        self.check(x)?;
        let w = self.whiten(x.data());
        let values = symmetric_eigenvalues(w.view()).map_err(|_| SpdError::EigenFailure)?;
        if values.iter().any(|&v| !(v > T::zero())) {
            return Err(SpdError::NotPositiveDefinite { min_eigenvalue: 0.0, threshold: 0.0 });
        }
        Ok(values.iter().map(|&v| v.ln() * v.ln()).sum::<T>().sqrt())
    }

    pub fn log_map(&self, x: &SpdMatrix<T>) -> Result<Array2<T>, SpdError> {
        let s = self.whitened_log(x)?;
        let mut out = self.unwhiten(&s);
        super::symmetrize_in_place(&mut out);
        Ok(out)
    }

    /// Exp map from whitened tangent coordinates `S`: `B^{1/2} exp(S) B^{1/2}`.
    pub fn whitened_exp(&self, s: &Array2<T>) -> Result<SpdMatrix<T>, SpdError> {
        if s.nrows() != self.dim() || s.ncols() != self.dim() {
            return Err(SpdError::DimensionMismatch { expected: self.dim(), found: s.nrows() });
        }
        SpdMatrix::from_symmetric(self.unwhiten(&sym_expm_raw(s)?))
    }

    pub fn exp_map(&self, v: &Array2<T>) -> Result<SpdMatrix<T>, SpdError> {
        if v.nrows() != self.dim() || v.ncols() != self.dim() {
            return Err(SpdError::DimensionMismatch { expected: self.dim(), found: v.nrows() });
        }
        ensure_symmetric(v)?;
        let mut w = self.whiten(v);
        super::symmetrize_in_place(&mut w);
        self.whitened_exp(&w)
    }
}

/// Affine-invariant Riemannian distance `‖log(a^{-1/2} b a^{-1/2})‖_F`.
pub fn airm_distance<T: Scalar>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<T, SpdError> {
    a.ensure_same_dim(b)?;
    BasePoint::new(a.clone()).distance_to(b)
}

/// Point at parameter `t` on the geodesic from `a` (t = 0) to `b` (t = 1):
/// `a^{1/2} (a^{-1/2} b a^{-1/2})^t a^{1/2}`.
pub fn geodesic<T: Scalar>(a: &SpdMatrix<T>, b: &SpdMatrix<T>, t: T) -> Result<SpdMatrix<T>, SpdError> {
    a.ensure_same_dim(b)?;
    if !(t >= T::zero() && t <= T::one()) {
        return Err(SpdError::ParameterOutOfRange { name: "t", value: t.to_f64_lossy() });
    }
    if t == T::zero() {
        return Ok(a.clone());
    }
    if t == T::one() {
        return Ok(b.clone());
    }
    let base = BasePoint::new(a.clone());
    let inner = base.whiten(b.data());
    let eig = super::symmetric_eigen(inner.view()).map_err(|_| SpdError::EigenFailure)?;
    if !(eig.min_value() > T::zero()) {
        return Err(SpdError::NotPositiveDefinite {
            min_eigenvalue: eig.min_value().to_f64_lossy(),
            threshold: 0.0,
        });
    }
    let powered = eig.reconstruct_with(|x| x.powf(t));
    SpdMatrix::from_symmetric(base.unwhiten(&powered))
}

/// Riemannian log map `base^{1/2} log(base^{-1/2} x base^{-1/2}) base^{1/2}`.
pub fn log_map<T: Scalar>(base: &SpdMatrix<T>, x: &SpdMatrix<T>) -> Result<Array2<T>, SpdError> {
    base.ensure_same_dim(x)?;
    BasePoint::new(base.clone()).log_map(x)
}

/// Riemannian exp map, the inverse of [`log_map`]. `v` must be symmetric.
pub fn exp_map<T: Scalar>(base: &SpdMatrix<T>, v: &Array2<T>) -> Result<SpdMatrix<T>, SpdError> {
    BasePoint::new(base.clone()).exp_map(v)
}
