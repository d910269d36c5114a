//! QRS detection after Pan and Tompkins with local-maximum refinement.
//!
//! Pipeline: 5-15 Hz linear-phase band-pass, five-point derivative,
//! squaring, 150 ms moving-window integration, then adaptive dual
//! thresholds with a 200 ms refractory period, T-wave rejection and
//! searchback. Accepted detections are moved to the maximum of the
//! band-passed signal within +-50 ms.

use super::fir::{bandpass_fir, fir_filter_centered};
use super::{PreprocessError, Result};
use crate::scalar::Scalar;

/// Design cutoffs of the band-pass. A windowed-sinc cutoff is its -6 dB
/// point; these values put the -3 dB points close to 5 and 15 Hz.
pub(crate) const BAND_LOW_DESIGN: f64 = 4.5;
pub(crate) const BAND_HIGH_DESIGN: f64 = 15.5;

const REFRACTORY_S: f64 = 0.200;
const T_WAVE_WINDOW_S: f64 = 0.360;
const INTEGRATION_S: f64 = 0.150;
const REFINE_S: f64 = 0.050;
const SEARCHBACK_FACTOR: f64 = 1.66;
const RR_HISTORY: usize = 8;

/// About one second of taps, forced odd.
pub(crate) fn bandpass_taps(fs: f64) -> usize {
    let t = fs.round() as usize;
    t + 1 - t % 2
}

/// Running peak levels and thresholds of the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    pub spki: f64,
    pub npki: f64,
    pub threshold1: f64,
    pub threshold2: f64,
    /// Mean of the last eight RR intervals, samples.
    pub rr_average: f64,
    pub refractory_samples: usize,
}

impl DetectorState {
    pub fn new(spki: f64, npki: f64, rr_average: f64, refractory_samples: usize) -> Self {
        let npki = npki.max(0.0);
        let mut s = Self {
            spki: spki.max(npki),
            npki,
            threshold1: 0.0,
            threshold2: 0.0,
            rr_average,
            refractory_samples,
        };
        s.update_thresholds();
        s
    }

    fn update_thresholds(&mut self) {
        self.threshold1 = self.npki + 0.25 * (self.spki - self.npki);
        self.threshold2 = 0.5 * self.threshold1;
    }

    pub fn signal_peak(&mut self, peak: f64) {
        self.spki = 0.125 * peak + 0.875 * self.spki;
        self.spki = self.spki.max(self.npki);
        self.update_thresholds();
    }

    pub fn noise_peak(&mut self, peak: f64) {
        self.npki = 0.125 * peak + 0.875 * self.npki;
        // Keep spki >= npki so threshold1 stays between them.
        self.spki = self.spki.max(self.npki);
        self.update_thresholds();
    }
}

/// Intermediate signals, kept for inspection and plotting.
#[derive(Debug, Clone)]
pub struct PanTompkins<T> {
    pub bandpassed: Vec<T>,
    pub derivative: Vec<T>,
    pub integrated: Vec<T>,
    pub peaks: Vec<usize>,
    pub final_state: Option<DetectorState>,
}

fn derivative<T: Scalar>(x: &[T], fs: f64) -> Vec<T> {
    let n = x.len();
    let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
    let k = T::lit(fs / 8.0);
    let two = T::lit(2.0);
    (0..n as isize)
        .map(|i| (two * at(i + 1) + at(i + 2) - two * at(i - 1) - at(i - 2)) * k)
        .collect()
}

fn moving_average<T: Scalar>(x: &[T], window: usize) -> Vec<T> {
    let n = x.len();
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    for v in x {
        prefix.push(prefix[prefix.len() - 1] + v.as_f64());
    }
    let w = (2 * half + 1) as f64;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            T::lit((prefix[hi] - prefix[lo]) / w)
        })
        .collect()
}

/// Local maxima that also dominate every sample within `radius`, so ripples
/// on the flank of one integrated QRS hump yield a single candidate.
fn candidate_peaks(x: &[f64], radius: usize) -> Vec<usize> {
    (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1])
        .filter(|&i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(x.len());
            x[lo..i].iter().all(|&v| v < x[i]) && x[i + 1..hi].iter().all(|&v| v <= x[i])
        })
        .collect()
}

/// Detects R peaks; returns strictly increasing sample indices at least a
/// refractory period apart.
pub fn detect_r_peaks<T: Scalar>(signal: &[T], fs: f64) -> Result<Vec<usize>> {
    Ok(PanTompkins::run(signal, fs)?.peaks)
}

impl<T: Scalar> PanTompkins<T> {
    pub fn run(signal: &[T], fs: f64) -> Result<Self> {
        if !(fs >= 100.0) {
            return Err(PreprocessError::Params(format!("fs must be at least 100 Hz, got {fs}")));
        }
        let min_len = (2.0 * fs).ceil() as usize;
        if signal.len() < min_len {
            return Err(PreprocessError::Params(format!(
                "signal of {} samples is shorter than two seconds ({min_len})",
                signal.len()
            )));
        }
        let (lo, hi) = signal.iter().fold((signal[0], signal[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo == hi {
            let zeros = vec![T::zero(); signal.len()];
            return Ok(Self {
                bandpassed: zeros.clone(),
                derivative: zeros.clone(),
                integrated: zeros,
                peaks: Vec::new(),
                final_state: None,
            });
        }
        let taps = bandpass_fir(BAND_LOW_DESIGN, BAND_HIGH_DESIGN, fs, bandpass_taps(fs));
        let bandpassed = fir_filter_centered(signal, &taps);
        let deriv = derivative(&bandpassed, fs);
        let squared: Vec<T> = deriv.iter().map(|&d| d * d).collect();
        let window = ((INTEGRATION_S * fs).round() as usize).max(1);
        let integrated = moving_average(&squared, window);

        let mwi: Vec<f64> = integrated.iter().map(|v| v.as_f64()).collect();
        let slope: Vec<f64> = deriv.iter().map(|v| v.as_f64().abs()).collect();
        let bp: Vec<f64> = bandpassed.iter().map(|v| v.as_f64()).collect();
        let (peaks, final_state) = threshold_peaks(&mwi, &slope, fs, window);
        let peaks = refine(&peaks, &bp, fs);
        Ok(Self { bandpassed, derivative: deriv, integrated, peaks, final_state })
    }
}

fn threshold_peaks(mwi: &[f64], slope: &[f64], fs: f64, window: usize) -> (Vec<usize>, Option<DetectorState>) {
    let learn = (2.0 * fs) as usize;
    let learn_max = mwi[..learn].iter().copied().fold(0.0, f64::max);
    if !(learn_max > 0.0) {
        return (Vec::new(), None);
    }
    let learn_mean = mwi[..learn].iter().sum::<f64>() / learn as f64;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let t_wave = (T_WAVE_WINDOW_S * fs).round() as usize;
    let mut state = DetectorState::new(learn_max / 3.0, 0.5 * learn_mean, fs, refractory);

    let max_slope = |i: usize| {
        let lo = i.saturating_sub(window / 2);
        let hi = (i + window / 2 + 1).min(slope.len());
        slope[lo..hi].iter().copied().fold(0.0, f64::max)
    };

    let mut detections: Vec<usize> = Vec::new();
    let mut last_slope = 0.0;
    let mut rr_hist: Vec<f64> = Vec::new();
    // Sub-threshold candidates since the last detection, for searchback.
    let mut pending: Vec<usize> = Vec::new();

    let accept = |i: usize,
                      state: &mut DetectorState,
                      detections: &mut Vec<usize>,
                      rr_hist: &mut Vec<f64>,
                      last_slope: &mut f64| {
        if let Some(&prev) = detections.last() {
            rr_hist.push((i - prev) as f64);
            if rr_hist.len() > RR_HISTORY {
                rr_hist.remove(0);
            }
            state.rr_average = rr_hist.iter().sum::<f64>() / rr_hist.len() as f64;
        }
        state.signal_peak(mwi[i]);
        *last_slope = max_slope(i);
        detections.push(i);
    };

    for i in candidate_peaks(mwi, refractory) {
        let v = mwi[i];
        if let Some(&last) = detections.last() {
            if i - last < refractory {
                continue;
            }
            if (i - last) as f64 > SEARCHBACK_FACTOR * state.rr_average {
                let best = pending
                    .iter()
                    .copied()
                    .filter(|&j| j > last + refractory && mwi[j] > state.threshold2)
                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                if let Some(j) = best {
                    accept(j, &mut state, &mut detections, &mut rr_hist, &mut last_slope);
                    pending.retain(|&k| k > j);
                    if i - j < refractory {
                        continue;
                    }
                }
            }
        }
        if v > state.threshold1 {
            let is_t_wave = matches!(detections.last(), Some(&last)
                if i - last < t_wave && max_slope(i) < 0.5 * last_slope);
            if is_t_wave {
                state.noise_peak(v);
                pending.push(i);
            } else {
                accept(i, &mut state, &mut detections, &mut rr_hist, &mut last_slope);
                pending.clear();
            }
        } else {
            state.noise_peak(v);
            pending.push(i);
        }
    }
    (detections, Some(state))
}

fn refine(peaks: &[usize], bp: &[f64], fs: f64) -> Vec<usize> {
    let reach = (REFINE_S * fs).round() as usize;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let mut moved: Vec<usize> = peaks
        .iter()
        .map(|&p| {
            let lo = p.saturating_sub(reach);
            let hi = (p + reach + 1).min(bp.len());
            // Earliest index wins ties.
            (lo..hi).fold(lo, |best, j| if bp[j] > bp[best] { j } else { best })
        })
        .collect();
    moved.sort_unstable();
    let mut out: Vec<usize> = Vec::with_capacity(moved.len());
    for p in moved {
        match out.last_mut() {
            Some(last) if p - *last < refractory => {
                if bp[p] > bp[*last] {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::{generate_synthetic_record, SynthesisParams};

    #[test]
    fn zero_signal_has_no_peaks() {
        assert!(detect_r_peaks(&vec![0.0f64; 5000], 500.0).unwrap().is_empty());
        assert!(detect_r_peaks(&vec![1.5f64; 5000], 500.0).unwrap().is_empty());
    }

    #[test]
    fn preconditions() {
        assert!(detect_r_peaks(&vec![0.0f64; 5000], 50.0).is_err());
        assert!(detect_r_peaks(&vec![0.0f64; 999], 500.0).is_err());
    }

    #[test]
    fn state_invariants() {
        let mut s = DetectorState::new(4.0, 1.0, 500.0, 100);
        assert_eq!(s.threshold1, 1.75);
        assert_eq!(s.threshold2, 0.875);
        s.signal_peak(12.0);
        assert_eq!(s.spki, 5.0);
        s.noise_peak(9.0);
        assert_eq!(s.npki, 2.0);
        assert_eq!(s.threshold1, 2.0 + 0.25 * 3.0);
        assert_eq!(s.threshold2, 0.5 * s.threshold1);
    }

    #[test]
    fn noiseless_sixty_bpm() {
        let s = generate_synthetic_record(&SynthesisParams::new("a", "N", 1)).unwrap();
        let x = s.record.to_physical::<f64>();
        let peaks = detect_r_peaks(&x, 500.0).unwrap();
        assert_eq!(peaks.len(), 10, "{peaks:?}");
        for (p, t) in peaks.iter().zip(&s.r_peaks) {
            assert!((*p as isize - *t as isize).abs() <= 10, "{p} vs {t}");
        }
    }

    #[test]
    fn tachycardic_and_other_rates() {
        for (fs, rr) in [(360u32, 0.5), (500, 0.45), (250, 0.8), (1000, 1.2)] {
            let mut p = SynthesisParams::new("a", "N", 3);
            p.fs = fs;
            p.mean_rr_s = rr;
            p.rr_jitter_s = 0.03;
            p.noise_snr_db = Some(15.0);
            let s = generate_synthetic_record(&p).unwrap();
            let peaks = detect_r_peaks(&s.record.to_physical::<f64>(), fs as f64).unwrap();
            assert_eq!(peaks.len(), s.r_peaks.len(), "fs {fs} rr {rr}");
        }
    }
}
