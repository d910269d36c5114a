//! Periodised discrete wavelet transform with the 16-tap Daubechies-8
//! filter bank.
//!
//! A level maps `n` samples to `ceil(n / 2)` approximation and detail
//! coefficients. Odd inputs are first extended by repeating the last sample,
//! so the transform is orthonormal on the (extended) even-length signal and
//! energy is preserved exactly whenever every level sees an even length.

use super::{PreprocessError, Result};
use crate::scalar::Scalar;

/// Daubechies-8 decomposition low-pass filter (minimum phase, 20
/// significant digits).
#[allow(clippy::excessive_precision)]
pub const DB8_LOW: [f64; 16] = [
    -0.00011747678412476953373,
    0.00067544940645056936637,
    -0.0003917403733769470463,
    -0.0048703529934515743104,
    0.0087460940474057767164,
    0.013981027917398281649,
    -0.044088253930794751507,
    -0.01736930100180754617,
    0.12874742662047845886,
    0.00047248457391328277036,
    -0.28401554296154692652,
    -0.015829105256349305667,
    0.58535468365420671277,
    0.67563073629728980681,
    0.31287159091429997066,
    0.054415842243104009955,
];

/// Decomposition high-pass filter, `g[i] = (-1)^i h[15 - i]`.
pub const DB8_HIGH: [f64; 16] = {
    let mut g = [0.0; 16];
    let mut i = 0;
    while i < 16 {
        let v = DB8_LOW[15 - i];
        g[i] = if i % 2 == 0 { v } else { -v };
        i += 1;
    }
    g
};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs<T> {
    /// Approximation at the deepest level.
    pub approximation: Vec<T>,
    /// Detail coefficients, finest (level 1) first.
    pub details: Vec<Vec<T>>,
    pub original_length: usize,
}

impl<T: Scalar> WaveletCoeffs<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Sum of squares over every coefficient.
    pub fn energy(&self) -> T {
        let sq = |v: &Vec<T>| v.iter().map(|&x| x * x).sum::<T>();
        sq(&self.approximation) + self.details.iter().map(sq).sum::<T>()
    }

    /// Input length seen by each level, level 1 first.
    fn level_inputs(&self) -> Vec<usize> {
        let mut lens = Vec::with_capacity(self.details.len());
        let mut n = self.original_length;
        for _ in 0..self.details.len() {
            lens.push(n);
            n = n.div_ceil(2);
        }
        lens
    }
}

fn filters<T: Scalar>() -> ([T; 16], [T; 16]) {
    (DB8_LOW.map(T::lit), DB8_HIGH.map(T::lit))
}

fn analysis_step<T: Scalar>(x: &[T], lo: &[T; 16], hi: &[T; 16]) -> (Vec<T>, Vec<T>) {
    let n = x.len();
    let padded = n + n % 2;
    let at = |i: usize| {
        let j = i % padded;
        if j < n { x[j] } else { x[n - 1] }
    };
    let half = padded / 2;
    let mut a = Vec::with_capacity(half);
    let mut d = Vec::with_capacity(half);
    for k in 0..half {
        let (mut sa, mut sd) = (T::zero(), T::zero());
        for i in 0..16 {
            let v = at(2 * k + i);
            sa = sa + lo[i] * v;
            sd = sd + hi[i] * v;
        }
        a.push(sa);
        d.push(sd);
    }
    (a, d)
}

fn synthesis_step<T: Scalar>(a: &[T], d: &[T], out_len: usize, lo: &[T; 16], hi: &[T; 16]) -> Vec<T> {
    let padded = 2 * a.len();
    let mut x = vec![T::zero(); padded];
    for k in 0..a.len() {
        for i in 0..16 {
            let j = (2 * k + i) % padded;
            x[j] = x[j] + lo[i] * a[k] + hi[i] * d[k];
        }
    }
    x.truncate(out_len);
    x
}

/// Multi-level decomposition. Requires `levels >= 1` and
/// `signal.len() >= 2^levels`.
pub fn dwt<T: Scalar>(signal: &[T], levels: usize) -> Result<WaveletCoeffs<T>> {
    if levels == 0 || levels >= usize::BITS as usize || signal.len() < (1usize << levels) {
        return Err(PreprocessError::Level { len: signal.len(), levels });
    }
    let (lo, hi) = filters::<T>();
    let mut details = Vec::with_capacity(levels);
    let mut approx = signal.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, &lo, &hi);
        details.push(d);
        approx = a;
    }
    Ok(WaveletCoeffs { approximation: approx, details, original_length: signal.len() })
}

pub fn idwt<T: Scalar>(coeffs: &WaveletCoeffs<T>) -> Result<Vec<T>> {
    if coeffs.details.is_empty() {
        return Err(PreprocessError::Structure("no detail levels".into()));
    }
    let inputs = coeffs.level_inputs();
    for (j, d) in coeffs.details.iter().enumerate() {
        let want = inputs[j].div_ceil(2);
        if d.len() != want {
            return Err(PreprocessError::Structure(format!(
                "level {} detail has {} coefficients, expected {want}",
                j + 1,
                d.len()
            )));
        }
    }
    let deepest = inputs[inputs.len() - 1].div_ceil(2);
    if coeffs.approximation.len() != deepest {
        return Err(PreprocessError::Structure(format!(
            "approximation has {} coefficients, expected {deepest}",
            coeffs.approximation.len()
        )));
    }
    let (lo, hi) = filters::<T>();
    let mut approx = coeffs.approximation.clone();
    for j in (0..coeffs.details.len()).rev() {
        approx = synthesis_step(&approx, &coeffs.details[j], inputs[j], &lo, &hi);
    }
    Ok(approx)
}
