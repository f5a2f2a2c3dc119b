use ndarray::Array2;

use super::SignalError;
use crate::class::ClassId;
use crate::scalar::Scalar;

/// One patient-tagged `c × T` recording.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRecording<T> {
    pub patient_id: String,
    pub label: ClassId,
    samples: Array2<T>,
    pub sample_rate_hz: f64,
}

impl<T: Scalar> MultiChannelRecording<T> {
    pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 500.0;

    pub fn new(
        patient_id: impl Into<String>,
        label: ClassId,
        samples: Array2<T>,
        sample_rate_hz: f64,
    ) -> Result<Self, SignalError> {
        let (channels, len) = samples.dim();
        if channels == 0 || len < 2 {
            return Err(SignalError::TooShort { channels, samples: len });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(SignalError::NonFinite);
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(SignalError::ParameterOutOfRange { name: "sample_rate_hz", value: sample_rate_hz });
        }
        Ok(MultiChannelRecording { patient_id: patient_id.into(), label, samples, sample_rate_hz })
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &Array2<T> {
        &self.samples
    }

    /// Same metadata, new signal (validated).
    pub fn with_samples(&self, samples: Array2<T>) -> Result<Self, SignalError> {
        Self::new(self.patient_id.clone(), self.label.clone(), samples, self.sample_rate_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = MultiChannelRecording::new("p", ClassId::new("A"), Array2::<f64>::zeros((12, 10)), 500.0);
        assert!(ok.is_ok());
        assert!(matches!(
            MultiChannelRecording::new("p", ClassId::new("A"), Array2::<f64>::zeros((12, 1)), 500.0),
            Err(SignalError::TooShort { .. })
        ));
        let mut bad = Array2::<f64>::zeros((2, 4));
        bad[[1, 2]] = f64::INFINITY;
        assert!(matches!(
            MultiChannelRecording::new("p", ClassId::new("A"), bad, 500.0),
            Err(SignalError::NonFinite)
        ));
        assert!(MultiChannelRecording::new("p", ClassId::new("A"), Array2::<f64>::zeros((2, 4)), 0.0).is_err());
    }
}
