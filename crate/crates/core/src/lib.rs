//! Two-stream ECG rhythm classification.
//!
//! An *identified* stream (1D CNN over single 300-sample beats) and a
//! *temporal* stream (LSTM over ten beat frames) are trained independently
//! and combined by late fusion, either by averaging their class scores or by
//! a fully-connected layer over their stacked penultimate features.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision instantiation used by the command-line
//! tool and the tests.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod framing;
pub mod fsutil;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod signal_io;

pub use scalar::Scalar;

pub type Graph64 = nn::Graph<f64>;
pub type ParamStore64 = nn::ParamStore<f64>;
pub type BeatFrame64 = framing::BeatFrame<f64>;
pub type FrameSequence64 = framing::FrameSequence<f64>;
pub type IdentifiedStream64 = models::IdentifiedStream<f64>;
pub type TemporalStream64 = models::TemporalStream<f64>;
pub type FusionHead64 = models::FusionHead<f64>;

pub type Graph32 = nn::Graph<f32>;
pub type ParamStore32 = nn::ParamStore<f32>;
pub type IdentifiedStream32 = models::IdentifiedStream<f32>;
pub type TemporalStream32 = models::TemporalStream<f32>;
