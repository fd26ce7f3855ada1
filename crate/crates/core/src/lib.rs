//! FUN-SSL sound source localization: STFT frontend, scene simulator, DP-RTF
//! targets, the multi-resolution dual-path network, PIT training and
//! metric evaluation.

pub mod dprtf;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod network;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
