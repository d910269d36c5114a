//! Synthetic-record helpers and signal-quality oracles.

use beatstream::signal_io::{generate_synthetic_record, Morphology, SynthesisParams, SyntheticRecord};

/// Varied rhythm and morphology at a given SNR.
pub fn noisy_record(seed: u64, snr_db: f64) -> SyntheticRecord {
    let mut p = SynthesisParams::new(format!("r{seed}"), "N", seed);
    p.noise_snr_db = Some(snr_db);
    p.rr_jitter_s = 0.05;
    p.mean_rr_s = 0.7 + 0.5 * ((seed % 7) as f64 / 6.0);
    p.morphology = match seed % 3 {
        0 => Morphology::normal(),
        1 => Morphology::inverted_t(),
        _ => Morphology::peaked_p(),
    };
    generate_synthetic_record(&p).unwrap()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// SNR of `estimate` against `clean`, both taken mean-removed.
pub fn snr_db(clean: &[f64], estimate: &[f64]) -> f64 {
    let (mc, me) = (mean(clean), mean(estimate));
    let sig: f64 = clean.iter().map(|c| (c - mc).powi(2)).sum();
    let err: f64 = clean.iter().zip(estimate).map(|(c, e)| ((e - me) - (c - mc)).powi(2)).sum();
    10.0 * (sig / err).log10()
}

/// Power of the `freq`-Hz sinusoidal component of `x` (least-squares fit).
pub fn tone_power(x: &[f64], freq: f64, fs: f64) -> f64 {
    let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let w = std::f64::consts::TAU * freq * i as f64 / fs;
        let (s, c) = w.sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        xs += v * s;
        xc += v * c;
    }
    let det = ss * cc - sc * sc;
    let a = (xs * cc - xc * sc) / det;
    let b = (xc * ss - xs * sc) / det;
    0.5 * (a * a + b * b)
}

/// Clean record plus a 0.3 Hz drift as large as the R wave.
pub fn drifted_record(seed: u64) -> Vec<f64> {
    let mut p = SynthesisParams::new("d", "N", seed);
    p.mean_rr_s = 0.8 + 0.05 * seed as f64;
    let s = generate_synthetic_record(&p).unwrap();
    let peak = s.clean_mv.iter().copied().fold(f64::MIN, f64::max);
    s.clean_mv
        .iter()
        .enumerate()
        .map(|(i, c)| c + peak * (std::f64::consts::TAU * 0.3 * i as f64 / 500.0 + seed as f64).sin())
        .collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DetectionScore {
    pub tp: usize,
    pub fp: usize,
    pub fneg: usize,
}

impl DetectionScore {
    /// Greedy one-to-one matching within `tol` samples.
    pub fn add(&mut self, truth: &[usize], detected: &[usize], tol: usize) {
        let mut used = vec![false; detected.len()];
        for &t in truth {
            let hit = detected
                .iter()
                .enumerate()
                .filter(|(k, &p)| !used[*k] && p.abs_diff(t) <= tol)
                .min_by_key(|(_, &p)| p.abs_diff(t));
            match hit {
                Some((k, _)) => {
                    used[k] = true;
                    self.tp += 1;
                }
                None => self.fneg += 1,
            }
        }
        self.fp += used.iter().filter(|u| !**u).count();
    }

    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fneg) as f64
    }

    pub fn precision(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fp) as f64
    }
}
