use super::{dwt, idwt, PreprocessError, Result};
use crate::scalar::Scalar;

/// MAD-to-sigma factor for Gaussian noise.
const MAD_SCALE: f64 = 0.6745;

/// Decomposition depth used by [`denoise`]: `round(log2 fs)`, so the zeroed
/// approximation band ends near 0.5 Hz, capped at `floor(log2 n) - 2`.
pub fn denoise_levels(len: usize, fs: f64) -> Result<usize> {
    if len < 8 {
        return Err(PreprocessError::Level { len, levels: 1 });
    }
    let by_len = (usize::BITS - 1 - len.leading_zeros()) as usize - 2;
    let by_rate = fs.log2().round().max(1.0) as usize;
    Ok(by_rate.min(by_len))
}

pub fn soft_threshold<T: Scalar>(x: T, t: T) -> T {
    let m = x.abs() - t;
    if m > T::zero() {
        m * x.signum()
    } else {
        T::zero()
    }
}

fn median_abs<T: Scalar>(xs: &[T]) -> f64 {
    let mut v: Vec<f64> = xs.iter().map(|x| x.as_f64().abs()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Stein-unbiased-risk threshold for soft shrinkage of `d` with noise level
/// `sigma`, never above the universal threshold `sigma * sqrt(2 ln n)`.
pub fn sure_threshold<T: Scalar>(d: &[T], sigma: f64) -> f64 {
    let n = d.len();
    if n == 0 || !(sigma > 0.0) {
        return 0.0;
    }
    let mut sq: Vec<f64> = d.iter().map(|v| (v.as_f64() / sigma).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    let nf = n as f64;
    // risk(t) = n - 2 #{|x| <= t} + sum min(x^2, t^2), evaluated at t = |x_k|
    let mut best_risk = f64::INFINITY;
    let mut best_t2 = 0.0;
    let mut cum = 0.0;
    for (k, &t2) in sq.iter().enumerate() {
        cum += t2;
        let below = (k + 1) as f64;
        let risk = nf - 2.0 * below + cum + (nf - below) * t2;
        if risk < best_risk {
            best_risk = risk;
            best_t2 = t2;
        }
    }
    let universal = (2.0 * nf.ln()).sqrt();
    best_t2.sqrt().min(universal) * sigma
}

/// Wavelet denoising with adaptive soft thresholds.
///
/// The noise level is estimated once from the finest details,
/// `sigma = median(|d_1|) / 0.6745`; every detail level is then soft
/// thresholded at its SURE threshold and the deepest approximation is zeroed
/// to remove baseline wander. Output length equals input length.
pub fn denoise<T: Scalar>(signal: &[T], fs: f64) -> Result<Vec<T>> {
    if !(fs > 0.0) {
        return Err(PreprocessError::Params(format!("sampling rate must be positive, got {fs}")));
    }
    let levels = denoise_levels(signal.len(), fs)?;
    let mut coeffs = dwt(signal, levels)?;
    let sigma = median_abs(&coeffs.details[0]) / MAD_SCALE;
    for d in coeffs.details.iter_mut() {
        let t = T::lit(sure_threshold(d, sigma));
        d.iter_mut().for_each(|c| *c = soft_threshold(*c, t));
    }
    coeffs.approximation.iter_mut().for_each(|a| *a = T::zero());
    idwt(&coeffs)
}
