//! Beat frames and ten-frame sequences.
//!
//! Two ways of choosing frames: one beat per frame, a window from 0.25 s
//! before to 0.35 s after each R peak (R-centred), or ten equally spaced
//! windows across the whole record (chronological). Every frame holds 300
//! samples at 500 Hz and is Z-scored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{resample, zscore, PreprocessError};
use crate::scalar::Scalar;

pub const FRAME_LEN: usize = 300;
pub const SEQUENCE_LEN: usize = 10;
/// Rate at which a 0.6 s window is exactly [`FRAME_LEN`] samples.
pub const FRAME_FS: u32 = 500;
pub const BEFORE_R_S: f64 = 0.25;
pub const AFTER_R_S: f64 = 0.35;

#[derive(Debug, Error, PartialEq)]
pub enum FramingError {
    #[error("signal of {len} samples is shorter than one {FRAME_LEN}-sample frame")]
    TooShort { len: usize },
    #[error("cannot build a sequence from zero frames")]
    Empty,
    #[error("frame has {len} samples, expected {FRAME_LEN}")]
    FrameLength { len: usize },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMethod {
    RCentered,
    Chronological,
}

impl fmt::Display for FrameMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RCentered => "r_centered",
            Self::Chronological => "chronological",
        })
    }
}

impl std::str::FromStr for FrameMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r_centered" => Ok(Self::RCentered),
            "chronological" => Ok(Self::Chronological),
            other => Err(format!("unknown framing method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatFrame<T> {
    /// Exactly [`FRAME_LEN`] normalised samples (all zero for padding).
    pub samples: Vec<T>,
    pub source_record: String,
    /// R peak the frame was cut around; `None` for chronological frames.
    pub r_index: Option<usize>,
    pub label: usize,
}

impl<T: Scalar> BeatFrame<T> {
    pub fn zeros(source_record: &str, label: usize) -> Self {
        Self {
            samples: vec![T::zero(); FRAME_LEN],
            source_record: source_record.to_string(),
            r_index: None,
            label,
        }
    }

    pub fn is_padding(&self) -> bool {
        self.samples.iter().all(|v| v.is_zero())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<T> {
    pub frames: Vec<BeatFrame<T>>,
    pub label: usize,
    pub method: FrameMethod,
    /// Frames before the zero padding starts.
    pub real_frames: usize,
}

/// Outcome of cutting beats from a record.
#[derive(Debug, Clone)]
pub struct Segmented<T> {
    pub frames: Vec<BeatFrame<T>>,
    /// Beats whose window ran past either end of the signal.
    pub skipped_bounds: usize,
    /// Beats dropped because their window was constant.
    pub skipped_constant: usize,
}

/// Maps an arbitrary-length window onto [`FRAME_LEN`] samples by linear
/// interpolation at the 500 Hz grid, trimming or holding the last value when
/// the rounded length is off by one.
fn to_frame_rate<T: Scalar>(window: &[T], fs: u32) -> Result<Vec<T>, FramingError> {
    if fs == FRAME_FS && window.len() == FRAME_LEN {
        return Ok(window.to_vec());
    }
    let mut out = resample(window, fs as f64, FRAME_FS as f64)?;
    let last = out.last().copied().unwrap_or_else(T::zero);
    out.resize(FRAME_LEN, last);
    Ok(out)
}

/// R-peak window bounds `[r - before, r + after)` at rate `fs`, or `None`
/// when the window leaves the signal.
pub fn beat_window(r: usize, fs: u32, len: usize) -> Option<(usize, usize)> {
    let before = (BEFORE_R_S * fs as f64).round() as usize;
    let after = (AFTER_R_S * fs as f64).round() as usize;
    if r < before || r + after > len {
        return None;
    }
    Some((r - before, r + after))
}

/// Cuts one Z-scored frame per R peak.
pub fn segment_beats<T: Scalar>(
    signal: &[T],
    fs: u32,
    r_peaks: &[usize],
    source_record: &str,
    label: usize,
) -> Result<Segmented<T>, FramingError> {
    let mut out = Segmented { frames: Vec::with_capacity(r_peaks.len()), skipped_bounds: 0, skipped_constant: 0 };
    for &r in r_peaks {
        let Some((lo, hi)) = beat_window(r, fs, signal.len()) else {
            out.skipped_bounds += 1;
            continue;
        };
        let window = to_frame_rate(&signal[lo..hi], fs)?;
        match zscore(&window) {
            Ok(samples) => out.frames.push(BeatFrame {
                samples,
                source_record: source_record.to_string(),
                r_index: Some(r),
                label,
            }),
            Err(PreprocessError::ConstantFrame { .. }) => out.skipped_constant += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Start offsets of `n` equally spaced frames over `len` samples:
/// `round(i (len - 300) / (n - 1))`.
pub fn chronological_starts(len: usize, n: usize) -> Vec<usize> {
    if n <= 1 {
        return vec![0; n];
    }
    let span = len.saturating_sub(FRAME_LEN) as f64;
    (0..n)
        .map(|i| (i as f64 * span / (n - 1) as f64).round() as usize)
        .collect()
}

/// Splits a record into `n` equally spaced, possibly overlapping frames.
/// Signals not at 500 Hz are resampled first. Constant frames are dropped.
pub fn chronological_frames<T: Scalar>(
    signal: &[T],
    fs: u32,
    n: usize,
    source_record: &str,
    label: usize,
) -> Result<Vec<BeatFrame<T>>, FramingError> {
    let resampled;
    let x = if fs == FRAME_FS {
        signal
    } else {
        resampled = resample(signal, fs as f64, FRAME_FS as f64)?;
        &resampled[..]
    };
    if x.len() < FRAME_LEN {
        return Err(FramingError::TooShort { len: x.len() });
    }
    let mut frames = Vec::with_capacity(n);
    for start in chronological_starts(x.len(), n) {
        match zscore(&x[start..start + FRAME_LEN]) {
            Ok(samples) => frames.push(BeatFrame {
                samples,
                source_record: source_record.to_string(),
                r_index: None,
                label,
            }),
            Err(PreprocessError::ConstantFrame { .. }) => {
                log::debug!("{source_record}: constant chronological frame at {start} dropped");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(frames)
}

/// Keeps the first ten frames and zero-pads up to ten.
pub fn build_sequence<T: Scalar>(
    frames: &[BeatFrame<T>],
    label: usize,
    method: FrameMethod,
) -> Result<FrameSequence<T>, FramingError> {
    let first = frames.first().ok_or(FramingError::Empty)?;
    if let Some(bad) = frames.iter().find(|f| f.samples.len() != FRAME_LEN) {
        return Err(FramingError::FrameLength { len: bad.samples.len() });
    }
    let mut kept: Vec<BeatFrame<T>> = frames.iter().take(SEQUENCE_LEN).cloned().collect();
    let real_frames = kept.len();
    let source = first.source_record.clone();
    kept.resize_with(SEQUENCE_LEN, || BeatFrame::zeros(&source, label));
    Ok(FrameSequence { frames: kept, label, method, real_frames })
}

/// CSV dump with one row per frame: `record,label,v0,...,v299`.
pub fn frames_to_csv<T: Scalar>(frames: &[BeatFrame<T>], class_names: &[String]) -> String {
    let mut s = String::from("record,label");
    for i in 0..FRAME_LEN {
        s.push_str(&format!(",v{i}"));
    }
    s.push('\n');
    for f in frames {
        let label = class_names.get(f.label).cloned().unwrap_or_else(|| f.label.to_string());
        s.push_str(&f.source_record);
        s.push(',');
        s.push_str(&label);
        for v in &f.samples {
            s.push(',');
            s.push_str(&format!("{v}"));
        }
        s.push('\n');
    }
    s
}
