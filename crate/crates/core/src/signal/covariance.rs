use ndarray::Array2;

use super::{MultiChannelRecording, SignalError, SpatialFilter};
use crate::scalar::Scalar;
use crate::spd::{symmetrize_in_place, SpdMatrix};

pub const DEFAULT_SHRINKAGE: f64 = 0.01;

/// `Z = F·Y`, `C = Z·Zᵀ/(T−1)`, shrunk towards `(tr C / m)·I`.
pub fn estimate_covariance<T: Scalar>(
    rec: &MultiChannelRecording<T>,
    filter: &SpatialFilter<T>,
    shrinkage: f64,
) -> Result<SpdMatrix<T>, SignalError> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(SignalError::ParameterOutOfRange { name: "shrinkage", value: shrinkage });
    }
    if filter.in_channels() != rec.channels() {
        return Err(SignalError::ChannelMismatch { expected: filter.in_channels(), found: rec.channels() });
    }
    let z = filter.apply(rec.samples());
    let m = z.nrows();
    let denom = T::of((rec.len() - 1) as f64);
    let mut c: Array2<T> = z.dot(&z.t()).mapv(|x| x / denom);
    symmetrize_in_place(&mut c);
    if shrinkage > 0.0 {
        let s = T::of(shrinkage);
        let target = c.diag().sum() / T::of(m as f64);
        c.mapv_inplace(|x| x * (T::one() - s));
        for i in 0..m {
            c[[i, i]] = c[[i, i]] + s * target;
        }
    }
    SpdMatrix::new(c).map_err(SignalError::DegenerateSignal)
}
