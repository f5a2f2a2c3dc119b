use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{MultiChannelRecording, SignalError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    /// Lead used for peak detection; index 1 is lead II in standard order.
    pub reference_channel: usize,
    /// Output length; 500 samples is one second at 500 Hz.
    pub window_samples: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { reference_channel: 1, window_samples: 500 }
    }
}

/// Cuts a `window_samples` window centred on the R peak, taken as the first
/// sample of maximum absolute amplitude on the reference channel. Samples
/// falling outside the recording are zero. The peak lands at index
/// `window_samples / 2` of the output.
pub fn align_r_peaks<T: Scalar>(
    rec: &MultiChannelRecording<T>,
    config: &AlignConfig,
) -> Result<MultiChannelRecording<T>, SignalError> {
    let len = rec.len();
    let window = config.window_samples;
    if config.reference_channel >= rec.channels() {
        return Err(SignalError::ChannelOutOfRange { channel: config.reference_channel, channels: rec.channels() });
    }
    if window < 2 || window > len {
        return Err(SignalError::WindowTooLarge { window, len });
    }
    let reference = rec.samples().row(config.reference_channel);
    let mut peak = 0;
    let mut best = T::zero();
    for (i, &x) in reference.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            peak = i;
        }
    }
    if best == T::zero() {
        return Err(SignalError::EmptyRecording);
    }

    let start = peak as isize - (window / 2) as isize;
    let mut out = Array2::<T>::zeros((rec.channels(), window));
    for k in 0..window {
        let src = start + k as isize;
        if src >= 0 && (src as usize) < len {
            out.column_mut(k).assign(&rec.samples().column(src as usize));
        }
    }
    rec.with_samples(out)
}
