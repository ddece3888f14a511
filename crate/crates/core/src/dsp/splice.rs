use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Default silence between the end of the carrier phrase and the target word.
pub const DEFAULT_GAP_MS: f64 = 120.0;
/// How far past the nominal insertion point a zero-crossing may be.
pub const ZERO_CROSSING_SEARCH_MS: f64 = 10.0;

/// A phrase with a target word spliced in, and where the word starts.
#[derive(Debug, Clone)]
pub struct Spliced {
    pub audio: AudioBuffer,
    pub onset: usize,
}

impl Spliced {
    pub fn onset_s(&self) -> f64 {
        self.onset as f64 / self.audio.sample_rate() as f64
    }
}

fn is_zero_crossing(x: &[f64], i: usize) -> bool {
    let at = |k: usize| x.get(k).copied().unwrap_or(0.0);
    let cur = at(i);
    cur == 0.0 || (i > 0 && at(i - 1) * cur < 0.0)
}

/// Replaces everything after `marker + gap_ms` in `phrase` with `word`,
/// starting at the first zero-crossing at or after that point.
///
/// `marker` is the sample index where the last phrase word ends. Samples past
/// the end of the phrase count as silence.
pub fn insert_target(phrase: &AudioBuffer, word: &AudioBuffer, marker: usize, gap_ms: f64) -> Result<Spliced> {
    if phrase.sample_rate() != word.sample_rate() {
        return Err(Error::SampleRateMismatch(phrase.sample_rate(), word.sample_rate()));
    }
    if !(gap_ms >= 0.0) {
        return Err(Error::Malformed(format!("negative gap {gap_ms} ms")));
    }
    let sr = phrase.sample_rate() as f64;
    let target = marker + (gap_ms * sr / 1000.0).round() as usize;
    let search = (ZERO_CROSSING_SEARCH_MS * sr / 1000.0).round() as usize;
    let x = phrase.samples();
    let onset = (target..=target + search)
        .find(|&i| is_zero_crossing(x, i))
        .ok_or(Error::NoZeroCrossing(target))?;

    let mut samples = Vec::with_capacity(onset + word.len());
    samples.extend_from_slice(&x[..onset.min(x.len())]);
    samples.resize(onset, 0.0);
    samples.extend_from_slice(word.samples());
    Ok(Spliced {
        audio: AudioBuffer::from_raw(samples, phrase.sample_rate()),
        onset,
    })
}
