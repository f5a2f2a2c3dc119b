use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::eig::{symmetric_eigen, symmetrize_in_place, SymEig};
use super::SpdError;
use crate::class::ClassId;
use crate::scalar::Scalar;

/// A symmetric positive definite matrix.
///
/// Construction validates symmetry and positive definiteness and keeps the
/// eigendecomposition, so later matrix functions never refactor the same point.
/// The stored data is exactly symmetric.
#[derive(Debug, Clone)]
pub struct SpdMatrix<T: Scalar> {
    data: Array2<T>,
    eig: SymEig<T>,
}

impl<T: Scalar> PartialEq for SpdMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl<T: Scalar> SpdMatrix<T> {
    pub fn new(mut data: Array2<T>) -> Result<Self, SpdError> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(SpdError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(SpdError::EmptyInput);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(SpdError::NonFinite);
        }
        let tol = T::symmetry_tolerance();
        for i in 0..rows {
            for j in (i + 1)..rows {
                let a = data[[i, j]];
                let b = data[[j, i]];
                if (a - b).abs() > tol * T::one().max(a.abs()) {
                    return Err(SpdError::NotSymmetric {
                        row: i,
                        col: j,
                        delta: (a - b).abs().to_f64_lossy(),
                    });
                }
            }
        }
        symmetrize_in_place(&mut data);
        let eig = symmetric_eigen(data.view()).map_err(|_| SpdError::EigenFailure)?;
        check_eigenvalue_floor(&eig)?;
        Ok(SpdMatrix { data, eig })
    }

    /// Builds from a symmetric matrix produced by a trusted computation,
    /// symmetrizing without the tolerance check; positive definiteness is still enforced.
    pub(crate) fn from_symmetric(mut data: Array2<T>) -> Result<Self, SpdError> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(SpdError::NonFinite);
        }
        symmetrize_in_place(&mut data);
        let eig = symmetric_eigen(data.view()).map_err(|_| SpdError::EigenFailure)?;
        check_eigenvalue_floor(&eig)?;
        Ok(SpdMatrix { data, eig })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, SpdError> {
        let n = rows.len();
        let mut data = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SpdError::NotSquare { rows: n, cols: row.len() });
            }
            for (j, &x) in row.iter().enumerate() {
                data[[i, j]] = x;
            }
        }
        Self::new(data)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Array2::eye(n)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self, SpdError> {
        Self::new(Array2::from_diag(&Array1::from_vec(diag.to_vec())))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn into_data(self) -> Array2<T> {
        self.data
    }

    pub fn eig(&self) -> &SymEig<T> {
        &self.eig
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Converts to another scalar precision (re-validating in the target type).
    pub fn cast<U: Scalar>(&self) -> Result<SpdMatrix<U>, SpdError> {
        SpdMatrix::new(self.data.mapv(|x| U::of(x.to_f64_lossy())))
    }

    pub(crate) fn ensure_same_dim(&self, other: &Self) -> Result<(), SpdError> {
        if self.dim() != other.dim() {
            return Err(SpdError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// `n` lines of `n` comma-separated decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.data.rows() {
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{x}").expect("writing to String");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self, SpdError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map(T::of).map_err(|e| SpdError::Csv {
                        line: lineno + 1,
                        message: format!("{cell:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<T>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(SpdError::EmptyInput);
        }
        Self::from_rows(&rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, SpdError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| SpdError::Csv {
            line: 0,
            message: format!("{}: {e}", path.as_ref().display()),
        })?;
        Self::from_csv_str(&text)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }
}

fn check_eigenvalue_floor<T: Scalar>(eig: &SymEig<T>) -> Result<(), SpdError> {
    let n = T::of(eig.values.len() as f64);
    let lmax = eig.max_value();
    let lmin = eig.min_value();
    let threshold = n * T::epsilon() * lmax.max(T::zero());
    if !(lmax > T::zero()) || !(lmin > threshold) {
        return Err(SpdError::NotPositiveDefinite {
            min_eigenvalue: lmin.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    Ok(())
}

impl<T: Scalar + Serialize> Serialize for SpdMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for SpdMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(deserializer)?;
        SpdMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Flat tangent-space coordinates of one matrix: the upper triangle of a
/// symmetric matrix, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T> {
    pub dim: usize,
    pub values: Array1<T>,
    pub reference_id: String,
}

impl<T: Scalar> TangentVector<T> {
    pub fn new(dim: usize, values: Array1<T>, reference_id: impl Into<String>) -> Result<Self, SpdError> {
        let expected = packed_len(dim);
        if values.len() != expected {
            return Err(SpdError::DimensionMismatch { expected, found: values.len() });
        }
        Ok(TangentVector { dim, values, reference_id: reference_id.into() })
    }

    pub fn zeros(dim: usize, reference_id: impl Into<String>) -> Self {
        TangentVector { dim, values: Array1::zeros(packed_len(dim)), reference_id: reference_id.into() }
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

/// `n(n+1)/2`.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// One weighted, optionally labelled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdSample<T: Scalar> {
    pub matrix: SpdMatrix<T>,
    pub weight: T,
    pub label: Option<ClassId>,
    pub patient_id: Option<String>,
}

impl<T: Scalar> SpdSample<T> {
    pub fn new(matrix: SpdMatrix<T>) -> Self {
        SpdSample { matrix, weight: T::one(), label: None, patient_id: None }
    }

    pub fn labelled(matrix: SpdMatrix<T>, label: ClassId) -> Self {
        SpdSample { matrix, weight: T::one(), label: Some(label), patient_id: None }
    }

    pub fn with_weight(mut self, weight: T) -> Result<Self, SpdError> {
        if !(weight >= T::zero()) || !weight.is_finite() {
            return Err(SpdError::InvalidWeight { index: 0, weight: weight.to_f64_lossy() });
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn with_patient(mut self, patient_id: impl Into<String>) -> Self {
        self.patient_id = Some(patient_id.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_asymmetric() {
        let err = SpdMatrix::new(array![[2.0, 0.5], [0.4, 2.0]]).unwrap_err();
        assert!(matches!(err, SpdError::NotSymmetric { row: 0, col: 1, .. }));
    }

    #[test]
    fn tolerates_roundoff_asymmetry_and_symmetrizes() {
        let m = SpdMatrix::new(array![[2.0, 0.5 + 1e-12], [0.5, 2.0]]).unwrap();
        assert_eq!(m.data()[[0, 1]], m.data()[[1, 0]]);
    }

    #[test]
    fn rejects_singular_and_indefinite() {
        assert!(matches!(
            SpdMatrix::new(array![[1.0, 1.0], [1.0, 1.0]]),
            Err(SpdError::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            SpdMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]),
            Err(SpdError::NotPositiveDefinite { .. })
        ));
        // below the n·ε·λmax floor
        assert!(SpdMatrix::new(array![[1.0, 0.0], [0.0, 1e-17]]).is_err());
    }

    #[test]
    fn rejects_nan_and_nonsquare() {
        assert!(matches!(SpdMatrix::new(array![[f64::NAN]]), Err(SpdError::NonFinite)));
        assert!(matches!(
            SpdMatrix::new(Array2::<f64>::zeros((2, 3))),
            Err(SpdError::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let m = SpdMatrix::new(array![[2.0, 0.25, 0.1], [0.25, 1.5, -0.3], [0.1, -0.3, 1.0 / 3.0]]).unwrap();
        let back = SpdMatrix::<f64>::from_csv_str(&m.to_csv_string()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_symmetry_validated_on_load() {
        let err = SpdMatrix::<f64>::from_csv_str("1,0.5\n0.2,1\n").unwrap_err();
        assert!(matches!(err, SpdError::NotSymmetric { .. }));
        let err = SpdMatrix::<f64>::from_csv_str("1,x\n0,1\n").unwrap_err();
        assert!(matches!(err, SpdError::Csv { line: 1, .. }));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[4.0,0.0],[0.0,1.0]]");
        assert_eq!(serde_json::from_str::<SpdMatrix<f64>>(&s).unwrap(), m);
        assert!(serde_json::from_str::<SpdMatrix<f64>>("[[1.0,2.0],[2.0,1.0]]").is_err());
    }

    #[test]
    fn tangent_vector_length_invariant() {
        assert!(TangentVector::new(3, Array1::<f64>::zeros(6), "x").is_ok());
        assert!(TangentVector::new(3, Array1::<f64>::zeros(5), "x").is_err());
        assert_eq!(packed_len(12), 78);
    }

    #[test]
    fn sample_weight_must_be_nonnegative() {
        let s = SpdSample::new(SpdMatrix::<f64>::identity(2));
        assert!(s.clone().with_weight(-1.0).is_err());
        assert!(s.with_weight(0.0).is_ok());
    }

    #[test]
    fn cast_to_f32() {
        let m = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let m32: SpdMatrix<f32> = m.cast().unwrap();
        assert_eq!(m32.data()[[0, 0]], 4.0f32);
    }
}
