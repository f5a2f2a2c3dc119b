use ndarray::Array2;

use super::eig::{symmetric_eigen, SymEig};
use super::{SpdError, SpdMatrix};
use crate::scalar::Scalar;

/// Scalar function lifted to SPD matrices through the eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction<T> {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    Power(T),
}

impl<T: Scalar> MatrixFunction<T> {
    pub fn apply(self, x: T) -> T {
        match self {
            MatrixFunction::Log => x.ln(),
            MatrixFunction::Exp => x.exp(),
            MatrixFunction::Sqrt => x.sqrt(),
            MatrixFunction::InvSqrt => x.sqrt().recip(),
            MatrixFunction::Power(p) => x.powf(p),
        }
    }
}

/// Eigenvalues (descending, positive) and orthonormal eigenvectors of an SPD matrix.
pub fn sym_eig<T: Scalar>(m: &SpdMatrix<T>) -> &SymEig<T> {
    m.eig()
}

/// `V · diag(f(λ)) · Vᵀ`. The result is symmetric; for `Log` it may be indefinite.
pub fn matrix_fn<T: Scalar>(m: &SpdMatrix<T>, f: MatrixFunction<T>) -> Array2<T> {
    m.eig().reconstruct_with(|x| f.apply(x))
}

/// `m^t` as an SPD matrix.
pub fn spd_power<T: Scalar>(m: &SpdMatrix<T>, t: T) -> Result<SpdMatrix<T>, SpdError> {
    SpdMatrix::from_symmetric(matrix_fn(m, MatrixFunction::Power(t)))
}

/// Matrix exponential of an arbitrary symmetric matrix (always SPD).
pub fn symmetric_exp<T: Scalar>(v: &Array2<T>) -> Result<SpdMatrix<T>, SpdError> {
    ensure_symmetric(v)?;
    let eig = symmetric_eigen(v.view()).map_err(|_| SpdError::EigenFailure)?;
    SpdMatrix::from_symmetric(eig.reconstruct_with(|x| x.exp()))
}

pub(crate) fn ensure_symmetric<T: Scalar>(v: &Array2<T>) -> Result<(), SpdError> {
    let (rows, cols) = v.dim();
    if rows != cols {
        return Err(SpdError::NotSquare { rows, cols });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SpdError::NonFinite);
    }
    let tol = T::symmetry_tolerance();
    for i in 0..rows {
        for j in (i + 1)..rows {
            let (a, b) = (v[[i, j]], v[[j, i]]);
            if (a - b).abs() > tol * T::one().max(a.abs()) {
                return Err(SpdError::NotSymmetric { row: i, col: j, delta: (a - b).abs().to_f64_lossy() });
            }
        }
    }
    Ok(())
}

/// Exponential of a symmetric matrix that is already known to be symmetric.
pub(crate) fn sym_expm_raw<T: Scalar>(v: &Array2<T>) -> Result<Array2<T>, SpdError> {
    let eig = symmetric_eigen(v.view()).map_err(|_| SpdError::EigenFailure)?;
    Ok(eig.reconstruct_with(|x| x.exp()))
}

/// Logarithm of a matrix that is SPD up to roundoff (e.g. a whitened SPD matrix).
pub(crate) fn sym_logm_raw<T: Scalar>(v: &Array2<T>) -> Result<Array2<T>, SpdError> {
    let eig = symmetric_eigen(v.view()).map_err(|_| SpdError::EigenFailure)?;
    if !(eig.min_value() > T::zero()) {
        return Err(SpdError::NotPositiveDefinite {
            min_eigenvalue: eig.min_value().to_f64_lossy(),
            threshold: 0.0,
        });
    }
    Ok(eig.reconstruct_with(|x| x.ln()))
}
