//! In-context fault classification for vibration recordings.
//!
//! The pipeline turns raw vibration signals into banded spectral covariate
//! matrices ([`dsp`]), stacks labelled examples into a forecasting prompt
//! ([`prompt`]), and asks a small channel-time transformer with a Gaussian
//! mixture head ([`model`]) to forecast the one-hot label channels of the
//! final, unlabelled sample.  The class whose forecast intensity wins at the
//! last step is the prediction.  Everything runs on a from-scratch reverse-mode
//! autodiff tape ([`tape`]) over dense `f64` tensors ([`tensor`]).

pub mod dataset;
pub mod dsp;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod synth;
pub mod tape;
pub mod tensor;

/// Hard ceiling on model input channels: covariate channels plus one-hot
/// target channels must fit within this many variates.
pub const MAX_VARIATES: usize = 64;
