//! Synthetic single-lead ECG: each beat is a sum of five Gaussian
//! deflections (P, Q, R, S, T) placed relative to its R time, with optional
//! white noise and a 0.3 Hz baseline wander scaled to a target SNR.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, so records are
//! reproducible bit for bit on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Annotation, EcgRecord, Result, SignalIoError, SAMPLE_MAX, SAMPLE_MIN};

/// ADC units per millivolt for generated records.
pub const DEFAULT_GAIN: f64 = 200.0;
/// Baseline wander frequency in Hz.
pub const WANDER_HZ: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deflection {
    pub amplitude_mv: f64,
    /// Centre relative to the R time, seconds.
    pub offset_s: f64,
    /// Gaussian standard deviation, seconds.
    pub width_s: f64,
}

impl Deflection {
    pub const fn new(amplitude_mv: f64, offset_s: f64, width_s: f64) -> Self {
        Self { amplitude_mv, offset_s, width_s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Morphology {
    pub p: Deflection,
    pub q: Deflection,
    pub r: Deflection,
    pub s: Deflection,
    pub t: Deflection,
}

impl Morphology {
    pub fn deflections(&self) -> [Deflection; 5] {
        [self.p, self.q, self.r, self.s, self.t]
    }

    pub fn max_width(&self) -> f64 {
        self.deflections().iter().map(|d| d.width_s).fold(0.0, f64::max)
    }

    /// Upright P and T, narrow QRS.
    pub fn normal() -> Self {
        Self {
            p: Deflection::new(0.15, -0.20, 0.025),
            q: Deflection::new(-0.10, -0.035, 0.010),
            r: Deflection::new(1.00, 0.0, 0.010),
            s: Deflection::new(-0.25, 0.035, 0.010),
            t: Deflection::new(0.30, 0.25, 0.040),
        }
    }

    /// Broad QRS with a deep S and inverted T, loosely ventricular.
    pub fn wide_qrs() -> Self {
        Self {
            p: Deflection::new(0.0, -0.20, 0.025),
            q: Deflection::new(-0.05, -0.06, 0.020),
            r: Deflection::new(1.20, 0.0, 0.025),
            s: Deflection::new(-0.60, 0.07, 0.025),
            t: Deflection::new(-0.35, 0.28, 0.050),
        }
    }

    /// Normal QRS with an inverted T wave.
    pub fn inverted_t() -> Self {
        Self { t: Deflection::new(-0.30, 0.25, 0.040), ..Self::normal() }
    }

    /// Tall peaked P wave and a small R.
    pub fn peaked_p() -> Self {
        Self {
            p: Deflection::new(0.25, -0.18, 0.030),
            r: Deflection::new(0.80, 0.0, 0.010),
            ..Self::normal()
        }
    }

    /// A beat whose support stays well inside a 0.25 s / 0.35 s window around
    /// R even at 120 bpm, so neighbouring beats never enter the window.
    pub fn compact() -> Self {
        Self {
            p: Deflection::new(0.15, -0.10, 0.015),
            q: Deflection::new(-0.10, -0.030, 0.008),
            r: Deflection::new(1.00, 0.0, 0.008),
            s: Deflection::new(-0.25, 0.030, 0.008),
            t: Deflection::new(0.30, 0.14, 0.020),
        }
    }

    /// `compact` with an inverted T wave.
    pub fn compact_inverted_t() -> Self {
        Self { t: Deflection::new(-0.30, 0.14, 0.020), ..Self::compact() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub name: String,
    pub fs: u32,
    pub duration_s: f64,
    pub mean_rr_s: f64,
    /// Standard deviation of the per-beat RR perturbation, seconds.
    pub rr_jitter_s: f64,
    pub class_label: String,
    pub morphology: Morphology,
    /// `None` generates a noiseless record.
    pub noise_snr_db: Option<f64>,
    pub seed: u64,
    /// Symbol written into each beat annotation.
    pub beat_symbol: String,
}

impl SynthesisParams {
    /// 10 s at 500 Hz, 60 bpm, normal morphology, noiseless.
    pub fn new(name: impl Into<String>, class_label: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            fs: 500,
            duration_s: 10.0,
            mean_rr_s: 1.0,
            rr_jitter_s: 0.0,
            class_label: class_label.into(),
            morphology: Morphology::normal(),
            noise_snr_db: None,
            seed,
            beat_symbol: "N".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SignalIoError::Params(m));
        if self.fs == 0 {
            return err("fs must be positive".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return err(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if self.morphology.deflections().iter().any(|d| !(d.width_s > 0.0)) {
            return err("all deflection widths must be positive".into());
        }
        let min_rr = 2.0 * self.morphology.max_width();
        if !(self.mean_rr_s > min_rr) {
            return err(format!(
                "mean_rr_s {} is shorter than the beat support (2 x max width = {min_rr})",
                self.mean_rr_s
            ));
        }
        if !(self.rr_jitter_s >= 0.0 && self.rr_jitter_s.is_finite()) {
            return err(format!("rr_jitter_s must be non-negative, got {}", self.rr_jitter_s));
        }
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() {
                return err("noise_snr_db must be finite".into());
            }
        }
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) {
            return err(format!("record name `{}` must be non-empty without whitespace", self.name));
        }
        Ok(())
    }
}

/// Generated record together with the generator's ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticRecord {
    pub record: EcgRecord,
    /// Sample index of every R maximum inside the record.
    pub r_peaks: Vec<usize>,
    /// Noise-free signal in mV.
    pub clean_mv: Vec<f64>,
    /// Added noise in mV (zero when noiseless).
    pub noise_mv: Vec<f64>,
    pub label: String,
}

/// Mean-removed signal power.
pub(crate) fn ac_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64
}

pub fn generate_synthetic_record(params: &SynthesisParams) -> Result<SyntheticRecord> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fs = params.fs as f64;
    let n = (params.duration_s * fs).round() as usize;
    if n == 0 {
        return Err(SignalIoError::Params("duration shorter than one sample".into()));
    }

    // R positions snapped to the sample grid so each R deflection peaks on a
    // sample. One extra beat on each side keeps the edges stationary.
    let mut r_times: Vec<isize> = Vec::new();
    let rr_samples = |rng: &mut ChaCha8Rng| -> isize {
        let z: f64 = if params.rr_jitter_s > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        let rr = (params.mean_rr_s + params.rr_jitter_s * z).max(0.5 * params.mean_rr_s);
        ((rr * fs).round() as isize).max(1)
    };
    let first = (0.5 * params.mean_rr_s * fs).round() as isize;
    let mean_rr = (params.mean_rr_s * fs).round() as isize;
    r_times.push(first - mean_rr);
    let mut t = first;
    while t < n as isize {
        r_times.push(t);
        t += rr_samples(&mut rng);
    }
    r_times.push(t);

    let mut clean = vec![0.0f64; n];
    for &r in &r_times {
        for d in params.morphology.deflections() {
            if d.amplitude_mv == 0.0 {
                continue;
            }
            let centre = r as f64 + d.offset_s * fs;
            let sigma = d.width_s * fs;
            let reach = 6.0 * sigma;
            let lo = (centre - reach).floor().max(0.0) as usize;
            let hi = ((centre + reach).ceil() as isize).min(n as isize - 1);
            if hi < 0 {
                continue;
            }
            for (i, v) in clean.iter_mut().enumerate().take(hi as usize + 1).skip(lo) {
                let u = (i as f64 - centre) / sigma;
                *v += d.amplitude_mv * (-0.5 * u * u).exp();
            }
        }
    }
    let r_peaks: Vec<usize> = r_times
        .iter()
        .filter(|&&r| r >= 0 && (r as usize) < n)
        .map(|&r| r as usize)
        .collect();

    let noise = match params.noise_snr_db {
        None => vec![0.0; n],
        Some(snr_db) => {
            let target = ac_power(&clean) / 10f64.powf(snr_db / 10.0);
            let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let wander: Vec<f64> = (0..n)
                .map(|i| (std::f64::consts::TAU * WANDER_HZ * i as f64 / fs + phase).sin())
                .collect();
            let ms = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
            // Half the noise power each, then rescale so the realised total
            // matches the target exactly.
            let ws = (0.5 * target / ms(&white).max(f64::MIN_POSITIVE)).sqrt();
            let bs = (0.5 * target / ms(&wander).max(f64::MIN_POSITIVE)).sqrt();
            let mut noise: Vec<f64> = white.iter().zip(&wander).map(|(w, b)| ws * w + bs * b).collect();
            let total = ms(&noise);
            if total > 0.0 {
                let k = (target / total).sqrt();
                noise.iter_mut().for_each(|v| *v *= k);
            }
            noise
        }
    };

    let mut samples = Vec::with_capacity(n);
    for (i, (c, e)) in clean.iter().zip(&noise).enumerate() {
        let adc = ((c + e) * DEFAULT_GAIN).round();
        if adc < SAMPLE_MIN as f64 || adc > SAMPLE_MAX as f64 {
            return Err(SignalIoError::Params(format!(
                "sample {i} ({:.3} mV) exceeds the 12-bit ADC range",
                c + e
            )));
        }
        samples.push(adc as i32);
    }
    let anns = r_peaks
        .iter()
        .map(|&r| Annotation::new(r, params.beat_symbol.clone()))
        .collect();
    let record = EcgRecord::new(params.name.clone(), params.fs, DEFAULT_GAIN, 0, samples, Some(anns))?;
    Ok(SyntheticRecord {
        record,
        r_peaks,
        clean_mv: clean,
        noise_mv: noise,
        label: params.class_label.clone(),
    })
}
