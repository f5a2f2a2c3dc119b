//! Conversion between 12-lead ECG and the 3-dimensional vectorcardiogram.
//!
//! The inverse Dower matrix maps the eight independent leads (I, II, V1–V6)
//! to the orthogonal X, Y, Z leads. Coefficients are the published values of
//! Edenbrandt & Pahlm, "Vectorcardiogram synthesized from a 12-lead ECG:
//! superiority of the inverse Dower matrix", J. Electrocardiol. 21(4), 1988,
//! reordered here to the (I, II, V1, ..., V6) column order.
//!
//! The way back uses the Moore–Penrose pseudo-inverse of that matrix for the
//! eight independent leads and the Einthoven/Goldberger relations for the
//! remaining four limb leads.

use ndarray::{array, Array2, Axis};

use super::{MultiChannelRecording, SignalError};
use crate::scalar::Scalar;
use crate::spd::{cholesky, solve_lower, solve_lower_transpose};

/// Standard 12-lead order expected by the VCG functions.
pub const LEAD_NAMES: [&str; 12] = ["I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"];

/// Rows of the 12-lead matrix holding I, II, V1..V6.
const INDEPENDENT_LEADS: [usize; 8] = [0, 1, 6, 7, 8, 9, 10, 11];

/// `3 × 8` inverse Dower matrix, columns (I, II, V1, V2, V3, V4, V5, V6).
pub fn inverse_dower_matrix<T: Scalar>() -> Array2<T> {
    array![
        [0.156, -0.010, -0.172, -0.074, 0.122, 0.231, 0.239, 0.194],
        [-0.227, 0.887, 0.057, -0.019, -0.106, -0.022, 0.041, 0.048],
        [0.022, 0.102, -0.229, -0.310, -0.246, -0.063, 0.055, 0.108],
    ]
    .mapv(T::of)
}

/// `8 × 3` pseudo-inverse `Dᵀ (D Dᵀ)⁻¹` of the inverse Dower matrix.
pub fn forward_dower_matrix<T: Scalar>() -> Array2<T> {
    let d = inverse_dower_matrix::<T>();
    let gram = d.dot(&d.t());
    let l = cholesky(gram.view()).expect("inverse Dower rows are independent");
    let gram_inv = solve_lower_transpose(&l, &solve_lower(&l, &Array2::eye(3)));
    d.t().dot(&gram_inv)
}

fn check_twelve<T: Scalar>(rec: &MultiChannelRecording<T>) -> Result<(), SignalError> {
    if rec.channels() != 12 {
        return Err(SignalError::WrongChannelCount(rec.channels()));
    }
    Ok(())
}

/// `3 × T` VCG from a 12-lead recording in standard order.
pub fn dower_to_vcg<T: Scalar>(rec: &MultiChannelRecording<T>) -> Result<Array2<T>, SignalError> {
    check_twelve(rec)?;
    let independent = rec.samples().select(Axis(0), &INDEPENDENT_LEADS);
    Ok(inverse_dower_matrix::<T>().dot(&independent))
}

/// `12 × T` leads reconstructed from a `3 × T` VCG.
pub fn vcg_to_12lead<T: Scalar>(vcg: &Array2<T>) -> Result<Array2<T>, SignalError> {
    if vcg.nrows() != 3 {
        return Err(SignalError::WrongChannelCount(vcg.nrows()));
    }
    let independent = forward_dower_matrix::<T>().dot(vcg);
    let len = vcg.ncols();
    let half = T::of(0.5);
    let mut out = Array2::<T>::zeros((12, len));
    for (row, &lead) in INDEPENDENT_LEADS.iter().enumerate() {
        out.row_mut(lead).assign(&independent.row(row));
    }
    for t in 0..len {
        let (i, ii) = (out[[0, t]], out[[1, t]]);
        out[[2, t]] = ii - i;
        out[[3, t]] = -(i + ii) * half;
        out[[4, t]] = i - ii * half;
        out[[5, t]] = ii - i * half;
    }
    Ok(out)
}

/// `Rz(γ)·Ry(β)·Rx(α)` for angles in degrees.
pub fn rotation_matrix<T: Scalar>(angles_deg: (f64, f64, f64)) -> Array2<T> {
    let (a, b, g) = (angles_deg.0.to_radians(), angles_deg.1.to_radians(), angles_deg.2.to_radians());
    let rx = array![[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]];
    let ry = array![[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let rz = array![[g.cos(), -g.sin(), 0.0], [g.sin(), g.cos(), 0.0], [0.0, 0.0, 1.0]];
    rz.dot(&ry).dot(&rx).mapv(T::of)
}

/// Rotates the VCG of a 12-lead recording about the three axes and projects
/// it back to 12 leads. Each angle must lie in [-45, 45] degrees.
pub fn vcg_augment<T: Scalar>(
    rec: &MultiChannelRecording<T>,
    angles_deg: (f64, f64, f64),
) -> Result<MultiChannelRecording<T>, SignalError> {
    for a in [angles_deg.0, angles_deg.1, angles_deg.2] {
        if !(-45.0..=45.0).contains(&a) {
            return Err(SignalError::AngleOutOfRange(a));
        }
    }
    let vcg = dower_to_vcg(rec)?;
    let rotated = rotation_matrix::<T>(angles_deg).dot(&vcg);
    rec.with_samples(vcg_to_12lead(&rotated)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::ClassId;
    use crate::spd::frobenius_norm;

    fn rec(samples: Array2<f64>) -> MultiChannelRecording<f64> {
        MultiChannelRecording::new("p", ClassId::new("A"), samples, 500.0).unwrap()
    }

    fn wavy(len: usize) -> Array2<f64> {
        Array2::from_shape_fn((12, len), |(c, t)| ((c + 1) as f64 * 0.37 * t as f64).sin() + 0.1 * c as f64)
    }

    #[test]
    fn zero_signal_zero_vcg() {
        let v = dower_to_vcg(&rec(Array2::zeros((12, 5)))).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn impulse_on_lead_one_selects_first_column() {
        let mut s = Array2::zeros((12, 3));
        s[[0, 1]] = 1.0;
        let v = dower_to_vcg(&rec(s)).unwrap();
        let d = inverse_dower_matrix::<f64>();
        for k in 0..3 {
            assert_eq!(v[[k, 1]], d[[k, 0]]);
            assert_eq!(v[[k, 0]], 0.0);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let r = rec(wavy(40));
        let v = dower_to_vcg(&r).unwrap();
        let back = rec(vcg_to_12lead(&v).unwrap());
        let v2 = dower_to_vcg(&back).unwrap();
        assert!(frobenius_norm(&(&v2 - &v)) < 1e-10 * frobenius_norm(&v).max(1.0));
    }

    #[test]
    fn pseudo_inverse_is_right_inverse() {
        let d = inverse_dower_matrix::<f64>();
        let p = forward_dower_matrix::<f64>();
        assert!(frobenius_norm(&(&d.dot(&p) - &Array2::<f64>::eye(3))) < 1e-12);
    }

    #[test]
    fn limb_lead_relations_hold() {
        let out = vcg_to_12lead(&wavy(10).slice(ndarray::s![0..3, ..]).to_owned()).unwrap();
        for t in 0..10 {
            let (i, ii) = (out[[0, t]], out[[1, t]]);
            assert!((out[[2, t]] - (ii - i)).abs() < 1e-15);
            assert!((out[[3, t]] + out[[4, t]] + out[[5, t]]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rotation_is_subspace_projection() {
        let r = rec(wavy(30));
        let out = vcg_augment(&r, (0.0, 0.0, 0.0)).unwrap();
        let proj = vcg_to_12lead(&dower_to_vcg(&r).unwrap()).unwrap();
        assert!(frobenius_norm(&(out.samples() - &proj)) < 1e-12);
    }

    #[test]
    fn rotation_then_inverse_about_one_axis() {
        let r = rec(wavy(30));
        let there = vcg_augment(&r, (0.0, 30.0, 0.0)).unwrap();
        let back = vcg_augment(&there, (0.0, -30.0, 0.0)).unwrap();
        let identity = vcg_augment(&r, (0.0, 0.0, 0.0)).unwrap();
        assert!(frobenius_norm(&(back.samples() - identity.samples())) < 1e-10);
    }

    #[test]
    fn rotation_preserves_vcg_norm() {
        let r = rec(wavy(30));
        let v = dower_to_vcg(&r).unwrap();
        let rot = rotation_matrix::<f64>((12.0, -33.0, 41.0)).dot(&v);
        assert!((frobenius_norm(&rot) - frobenius_norm(&v)).abs() < 1e-12);
        let augmented = vcg_augment(&r, (12.0, -33.0, 41.0)).unwrap();
        let v_aug = dower_to_vcg(&augmented).unwrap();
        assert!((frobenius_norm(&v_aug) - frobenius_norm(&v)).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let r = rec(wavy(5));
        assert!(matches!(vcg_augment(&r, (50.0, 0.0, 0.0)), Err(SignalError::AngleOutOfRange(_))));
        let short = MultiChannelRecording::new("p", ClassId::new("A"), Array2::<f64>::zeros((8, 5)), 500.0).unwrap();
        assert!(matches!(dower_to_vcg(&short), Err(SignalError::WrongChannelCount(8))));
    }
}
