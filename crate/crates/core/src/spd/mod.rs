//! Geometry of the manifold of symmetric positive definite matrices under the
//! affine-invariant Riemannian metric.
//!
//! For SPD matrices `A`, `B` the metric distance is
//! `d(A, B) = ‖log(A^{-1/2} B A^{-1/2})‖_F`, which is invariant under every
//! congruence `X ↦ W X Wᵀ` with invertible `W`. All operations here are pure
//! functions of immutable inputs.

mod eig;
mod functions;
mod matrix;
mod mean;
mod metric;
mod tangent;

use thiserror::Error;

pub use eig::{
    cholesky, frobenius_norm, solve_lower, solve_lower_transpose, symmetric_eigen,
    symmetric_eigenvalues, symmetrize_in_place, EigenNoConvergence, SymEig,
};
pub use functions::{matrix_fn, spd_power, sym_eig, symmetric_exp, MatrixFunction};
pub use matrix::{packed_len, SpdMatrix, SpdSample, TangentVector};
pub use mean::{karcher_mean, weighted_karcher_mean, KarcherConfig};
pub use metric::{airm_distance, exp_map, geodesic, log_map, BasePoint};
pub use tangent::{
    fingerprint, pack_upper, tangent_unvectorize, tangent_vectorize, unpack_upper,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not symmetric at ({row}, {col}): |difference| = {delta:e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },
    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:e} <= {threshold:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, threshold: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter {name} = {value} is out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("Karcher iteration did not converge in {max_iter} iterations (residual {residual:e})")]
    DidNotConverge { max_iter: usize, residual: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("sample {index} has invalid weight {weight}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("sample weights sum to zero")]
    ZeroTotalWeight,
    #[error("symmetric eigensolver failed to converge")]
    EigenFailure,
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}
