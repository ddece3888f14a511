//! Phase-vocoder signal processing: STFT, time-varying stretch and pitch
//! shift, pitch tracking and flattening, and target-word splicing.
//!
//! Every function here is a pure function of its inputs.

pub mod f0;
pub mod splice;
pub mod stft;
pub mod vocoder;

pub use f0::{estimate_f0, flatten_pitch, F0Range, F0Track, FLAT_TARGET_HZ};
pub use splice::{insert_target, Spliced, DEFAULT_GAP_MS};
pub use stft::{istft, stft, StftConfig, WindowKind};
pub use vocoder::{apply_profiles, pitch_shift, time_stretch, Rendered, TimeMap};
