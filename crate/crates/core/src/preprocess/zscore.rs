use super::{PreprocessError, Result};
use crate::scalar::Scalar;

/// Population standard deviations below this are treated as constant.
pub const CONSTANT_STD: f64 = 1e-12;

/// Zero-mean, unit population standard deviation.
pub fn zscore<T: Scalar>(frame: &[T]) -> Result<Vec<T>> {
    if frame.is_empty() {
        return Err(PreprocessError::Empty);
    }
    let n = T::lit(frame.len() as f64);
    let mean = frame.iter().copied().sum::<T>() / n;
    let var = frame.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt();
    if !(std.as_f64() >= CONSTANT_STD) {
        return Err(PreprocessError::ConstantFrame { std: std.as_f64() });
    }
    Ok(frame.iter().map(|&x| (x - mean) / std).collect())
}
