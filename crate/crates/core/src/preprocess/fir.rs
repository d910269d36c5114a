//! Linear-phase FIR design and zero-delay application.

use crate::scalar::Scalar;

/// Hamming-windowed sinc band-pass with `taps` (odd) coefficients, unity
/// gain at the geometric band centre.
pub fn bandpass_fir(low_hz: f64, high_hz: f64, fs: f64, taps: usize) -> Vec<f64> {
    assert!(taps % 2 == 1, "tap count must be odd");
    let m = (taps / 2) as isize;
    let (f1, f2) = (low_hz / fs, high_hz / fs);
    let sinc_lp = |fc: f64, n: isize| -> f64 {
        if n == 0 {
            2.0 * fc
        } else {
            let x = std::f64::consts::PI * n as f64;
            (2.0 * fc * x).sin() / x
        }
    };
    let mut h: Vec<f64> = (-m..=m)
        .map(|n| {
            let w = 0.54
                - 0.46 * (std::f64::consts::TAU * (n + m) as f64 / (taps - 1) as f64).cos();
            (sinc_lp(f2, n) - sinc_lp(f1, n)) * w
        })
        .collect();
    let centre = (low_hz * high_hz).sqrt();
    let g = frequency_response(&h, centre, fs);
    h.iter_mut().for_each(|v| *v /= g);
    h
}

/// Magnitude response of `h` at `freq_hz`.
pub fn frequency_response(h: &[f64], freq_hz: f64, fs: f64) -> f64 {
    let w = std::f64::consts::TAU * freq_hz / fs;
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &c)| {
        (re + c * (w * n as f64).cos(), im - c * (w * n as f64).sin())
    });
    (re * re + im * im).sqrt()
}

/// Applies a symmetric odd-length filter centred on each output sample, so
/// the output is aligned with the input. The signal is extended by repeating
/// its edge samples, which keeps a zero-DC filter silent on constant input.
pub fn fir_filter_centered<T: Scalar>(x: &[T], h: &[f64]) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let m = h.len() / 2;
    let taps: Vec<T> = h.iter().map(|&v| T::lit(v)).collect();
    let mut ext = Vec::with_capacity(n + 2 * m);
    ext.extend(std::iter::repeat_n(x[0], m));
    ext.extend_from_slice(x);
    ext.extend(std::iter::repeat_n(x[n - 1], m));
    (0..n)
        .map(|i| {
            ext[i..i + h.len()]
                .iter()
                .zip(&taps)
                .fold(T::zero(), |acc, (&v, &c)| acc + c * v)
        })
        .collect()
}
