//! A kilobyte-scale acoustic event classifier.
//!
//! Raw audio is cut into five 0.6 s segments, each turned into a 26 × 13
//! MFCC matrix and fed through a FastGRNN recurrent cell with a softmax
//! output layer. Segment distributions are averaged per clip; per-class
//! thresholds turn that average into a set of sources present in the clip.
//!
//! The modules follow the pipeline:
//!
//! - [`audio_io`]: WAV ingest, resampling, segmentation
//! - [`dsp`]: STFT/ISTFT, mel filterbank, MFCC, spectral gating
//! - [`grnn`]: the recurrent cell, output layer and softmax
//! - [`train`]: normalization, BPTT, Adam, threshold calibration
//! - [`model_store`]: binary model files and int8 quantization
//! - [`eval`]: clip inference, multi-tone detection, confusion matrices
//!
//! The guide in `book/` walks through each stage; its code listings are
//! compiled and run as doctests of this crate.

pub mod audio_io;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod grnn;
pub mod matrix;
pub mod model_store;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;

// Book chapters, compiled as doctests so the listings cannot drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/cell.md")]
    mod cell {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/multitone.md")]
    mod multitone {}
    #[doc = include_str!("../../../book/src/denoising.md")]
    mod denoising {}
    #[doc = include_str!("../../../book/src/model-format.md")]
    mod model_format {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
