//! Signal conditioning ahead of framing: db8 wavelet denoising, linear
//! resampling, Z-score normalisation and R-peak detection.

mod denoise;
mod fir;
mod pan_tompkins;
mod resample;
mod wavelet;
mod zscore;

pub use denoise::{denoise, denoise_levels, soft_threshold, sure_threshold};
pub use fir::{bandpass_fir, fir_filter_centered, frequency_response};
pub use pan_tompkins::{detect_r_peaks, DetectorState, PanTompkins};
pub use resample::resample;
pub use wavelet::{dwt, idwt, WaveletCoeffs, DB8_HIGH, DB8_LOW};
pub use zscore::{zscore, CONSTANT_STD};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("signal of length {len} is too short for {levels} decomposition level(s)")]
    Level { len: usize, levels: usize },
    #[error("inconsistent wavelet coefficients: {0}")]
    Structure(String),
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("constant frame (population std {std:e})")]
    ConstantFrame { std: f64 },
    #[error("empty input")]
    Empty,
}

pub type Result<T, E = PreprocessError> = std::result::Result<T, E>;
