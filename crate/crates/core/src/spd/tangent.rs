use ndarray::{Array1, Array2};

use super::metric::BasePoint;
use super::{packed_len, SpdError, SpdMatrix, TangentVector};
use crate::scalar::Scalar;

/// Upper triangle of a symmetric matrix, row by row, with off-diagonal entries
/// scaled by √2 so that the Euclidean norm equals the Frobenius norm.
pub fn pack_upper<T: Scalar>(s: &Array2<T>) -> Array1<T> {
    let n = s.nrows();
    let sqrt2 = T::SQRT_2();
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        out.push(s[[i, i]]);
        for j in (i + 1)..n {
            out.push(s[[i, j]] * sqrt2);
        }
    }
    Array1::from_vec(out)
}

/// Inverse of [`pack_upper`].
pub fn unpack_upper<T: Scalar>(values: &Array1<T>, n: usize) -> Result<Array2<T>, SpdError> {
    if values.len() != packed_len(n) {
        return Err(SpdError::DimensionMismatch { expected: packed_len(n), found: values.len() });
    }
    let inv_sqrt2 = T::FRAC_1_SQRT_2();
    let mut s = Array2::zeros((n, n));
    let mut k = 0;
    for i in 0..n {
        s[[i, i]] = values[k];
        k += 1;
        for j in (i + 1)..n {
            let v = values[k] * inv_sqrt2;
            s[[i, j]] = v;
            s[[j, i]] = v;
            k += 1;
        }
    }
    Ok(s)
}

/// Short stable identifier of a base point (FNV-1a over dimension and entry bits).
pub fn fingerprint<T: Scalar>(m: &SpdMatrix<T>) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(&(m.dim() as u64).to_le_bytes());
    for &x in m.data().iter() {
        feed(&x.to_f64_lossy().to_bits().to_le_bytes());
    }
    format!("{hash:016x}")
}

impl<T: Scalar> BasePoint<T> {
    /// Tangent coordinates of `x` at this base point.
    pub fn vectorize(&self, x: &SpdMatrix<T>) -> Result<Array1<T>, SpdError> {
        Ok(pack_upper(&self.whitened_log(x)?))
    }

    pub fn unvectorize(&self, values: &Array1<T>) -> Result<SpdMatrix<T>, SpdError> {
        self.whitened_exp(&unpack_upper(values, self.dim())?)
    }
}

/// `upper(log(base^{-1/2} x base^{-1/2}))`, which equals
/// `upper(base^{-1/2} · log_base(x) · base^{-1/2})`.
pub fn tangent_vectorize<T: Scalar>(base: &SpdMatrix<T>, x: &SpdMatrix<T>) -> Result<TangentVector<T>, SpdError> {
    base.ensure_same_dim(x)?;
    let values = BasePoint::new(base.clone()).vectorize(x)?;
    Ok(TangentVector { dim: base.dim(), values, reference_id: fingerprint(base) })
}

/// Maps tangent coordinates back onto the manifold through the exp map at `base`.
pub fn tangent_unvectorize<T: Scalar>(v: &TangentVector<T>, base: &SpdMatrix<T>) -> Result<SpdMatrix<T>, SpdError> {
    if v.dim != base.dim() {
        return Err(SpdError::DimensionMismatch { expected: base.dim(), found: v.dim });
    }
    BasePoint::new(base.clone()).unvectorize(&v.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{airm_distance, frobenius_norm};
    use ndarray::array;
    use std::f64::consts::E;

    #[test]
    fn identity_at_identity_is_zero() {
        let i = SpdMatrix::<f64>::identity(4);
        let v = tangent_vectorize(&i, &i).unwrap();
        assert_eq!(v.values.len(), 10);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn length_for_twelve_leads() {
        let i = SpdMatrix::<f64>::identity(12);
        assert_eq!(tangent_vectorize(&i, &i).unwrap().values.len(), 78);
    }

    #[test]
    fn diagonal_closed_form() {
        let x = SpdMatrix::from_diagonal(&[E * E, E.powi(4)]).unwrap();
        let v = tangent_vectorize(&SpdMatrix::identity(2), &x).unwrap();
        let expected = [2.0, 0.0, 4.0];
        for (a, b) in v.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_equals_distance() {
        let b = SpdMatrix::new(array![[2.0f64, 0.3], [0.3, 1.0]]).unwrap();
        let x = SpdMatrix::new(array![[1.0f64, -0.4], [-0.4, 3.0]]).unwrap();
        let v = tangent_vectorize(&b, &x).unwrap();
        assert!((v.norm() - airm_distance(&b, &x).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn round_trip_and_zero_vector() {
        let b = SpdMatrix::new(array![[2.0f64, 0.3], [0.3, 1.0]]).unwrap();
        let x = SpdMatrix::new(array![[1.0f64, -0.4], [-0.4, 3.0]]).unwrap();
        let v = tangent_vectorize(&b, &x).unwrap();
        let back = tangent_unvectorize(&v, &b).unwrap();
        assert!(frobenius_norm(&(back.data() - x.data())) < 1e-13);
        let zero = TangentVector::zeros(2, "b");
        let back = tangent_unvectorize(&zero, &b).unwrap();
        assert!(frobenius_norm(&(back.data() - b.data())) < 1e-14);
        let bad = TangentVector::zeros(3, "b");
        assert!(tangent_unvectorize(&bad, &b).is_err());
    }

    #[test]
    fn reference_id_is_stable() {
        let b = SpdMatrix::new(array![[2.0f64, 0.3], [0.3, 1.0]]).unwrap();
        assert_eq!(fingerprint(&b), fingerprint(&b.clone()));
        assert_ne!(fingerprint(&b), fingerprint(&SpdMatrix::<f64>::identity(2)));
        let v = tangent_vectorize(&b, &b).unwrap();
        assert_eq!(v.reference_id, fingerprint(&b));
    }
}
