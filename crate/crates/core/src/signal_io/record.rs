use super::{Annotation, Result, SignalIoError};
use crate::scalar::Scalar;

/// A single-lead sampled ECG signal in raw ADC units.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub name: String,
    /// Sampling rate in Hz.
    pub fs: u32,
    /// ADC units per millivolt.
    pub gain: f64,
    /// ADC value at 0 mV.
    pub baseline: i32,
    pub samples: Vec<i32>,
    pub annotations: Option<Vec<Annotation>>,
}

impl EcgRecord {
    /// Builds a record, checking that the rate and gain are positive and that
    /// annotations are strictly increasing and inside the signal.
    pub fn new(
        name: impl Into<String>,
        fs: u32,
        gain: f64,
        baseline: i32,
        samples: Vec<i32>,
        annotations: Option<Vec<Annotation>>,
    ) -> Result<Self> {
        let record = Self {
            name: name.into(),
            fs,
            gain,
            baseline,
            samples,
            annotations,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fs == 0 {
            return Err(SignalIoError::InvalidRecord("sampling rate must be positive".into()));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(SignalIoError::InvalidRecord(format!(
                "gain must be positive, got {}",
                self.gain
            )));
        }
        if let Some(anns) = &self.annotations {
            self.check_annotations(anns)?;
        }
        Ok(())
    }

    fn check_annotations(&self, anns: &[Annotation]) -> Result<()> {
        let n = self.samples.len();
        for (k, a) in anns.iter().enumerate() {
            if a.sample >= n {
                return Err(SignalIoError::InvalidRecord(format!(
                    "annotation {k} at sample {} is outside the signal (length {n})",
                    a.sample
                )));
            }
            if k > 0 && anns[k - 1].sample >= a.sample {
                return Err(SignalIoError::InvalidRecord(format!(
                    "annotations not strictly increasing at entry {k}"
                )));
            }
        }
        Ok(())
    }

    /// Attaches annotations after validating them against this record.
    pub fn with_annotations(mut self, anns: Vec<Annotation>) -> Result<Self> {
        self.check_annotations(&anns)?;
        self.annotations = Some(anns);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs as f64
    }

    /// Signal in millivolts: `(adc - baseline) / gain`.
    pub fn to_physical<T: Scalar>(&self) -> Vec<T> {
        let gain = self.gain;
        let base = self.baseline as f64;
        self.samples
            .iter()
            .map(|&s| T::lit((s as f64 - base) / gain))
            .collect()
    }
}
