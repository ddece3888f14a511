//! Reverse-correlation toolkit for speech prosody.
//!
//! Random pitch and duration profiles are sampled per trial, rendered onto a
//! base recording with a phase vocoder, played to a listener in a
//! one-interval two-alternative forced-choice task, and the responses are
//! averaged into per-segment "kernels" showing which prosodic changes push the
//! listener towards each answer.

pub mod analysis;
pub mod audio;
pub mod bpf;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod observer;
pub mod profile;

pub use audio::AudioBuffer;
pub use bpf::Breakpoints;
pub use error::{Error, Result};
