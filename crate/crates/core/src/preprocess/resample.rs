use super::{PreprocessError, Result};
use crate::scalar::Scalar;

/// Linear-interpolation rate conversion. Output sample `i` sits at time
/// `i / to_fs`; positions past the last input sample take its value.
pub fn resample<T: Scalar>(signal: &[T], from_fs: f64, to_fs: f64) -> Result<Vec<T>> {
    if !(from_fs > 0.0 && to_fs > 0.0) {
        return Err(PreprocessError::Params(format!(
            "sampling rates must be positive, got {from_fs} -> {to_fs}"
        )));
    }
    if signal.is_empty() {
        return Ok(Vec::new());
    }
    if from_fs == to_fs {
        return Ok(signal.to_vec());
    }
    let out_len = (signal.len() as f64 * to_fs / from_fs).round() as usize;
    Ok(resample_to_len(signal, out_len, from_fs / to_fs))
}

/// Interpolates `out_len` samples spaced `step` input samples apart.
pub(crate) fn resample_to_len<T: Scalar>(signal: &[T], out_len: usize, step: f64) -> Vec<T> {
    let last = signal.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let k = pos.floor() as usize;
            if k >= last {
                return signal[last];
            }
            let frac = T::lit(pos - k as f64);
            signal[k] + (signal[k + 1] - signal[k]) * frac
        })
        .collect()
}
