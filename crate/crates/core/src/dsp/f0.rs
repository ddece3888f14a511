//! Autocorrelation pitch tracking and pitch flattening.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::bpf::Breakpoints;
use crate::dsp::stft::{RealFft, StftConfig};
use crate::dsp::vocoder::{shift_with, MAX_SHIFT_CENTS};
use crate::error::{Error, Result};

/// Normalized autocorrelation peak below which a frame is unvoiced.
pub const VOICING_THRESHOLD: f64 = 0.3;
/// Default flattening target.
pub const FLAT_TARGET_HZ: f64 = 120.0;

const DEFAULT_FRAME_HOP_S: f64 = 0.01;
/// Frames quieter than this mean-square level are unvoiced.
const SILENCE_POWER: f64 = 1e-10;
/// Candidate peaks within this fraction of the best one are considered; the
/// shortest lag among them wins, which avoids subharmonic (octave-down) errors.
const OCTAVE_TOLERANCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Range {
    pub min_hz: f64,
    pub max_hz: f64,
}

impl Default for F0Range {
    fn default() -> Self {
        F0Range {
            min_hz: 50.0,
            max_hz: 600.0,
        }
    }
}

/// Per-frame fundamental frequency; `0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub times: Vec<f64>,
    pub f0: Vec<f64>,
    pub frame_hop: f64,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.f0)
            .filter(|(_, &f)| f > 0.0)
            .map(|(&t, &f)| (t, f))
    }

    pub fn voiced_count(&self) -> usize {
        self.f0.iter().filter(|&&f| f > 0.0).count()
    }
}

/// Tracks f0 with a normalized cross-correlation between a two-period window
/// and its lagged copy, refined by parabolic interpolation of the peak.
///
/// Each analysis frame spans three periods of `range.min_hz`; frames are
/// placed every `frame_hop_s` seconds and time-stamped at their centre.
pub fn estimate_f0(audio: &AudioBuffer, frame_hop_s: f64, range: F0Range) -> Result<F0Track> {
    if audio.is_empty() {
        return Err(Error::EmptyAudio);
    }
    if !(range.min_hz > 0.0 && range.max_hz > range.min_hz) {
        return Err(Error::Malformed(format!("invalid f0 range {range:?}")));
    }
    let sr = audio.sample_rate() as f64;
    let x = audio.samples();
    let period = (sr / range.min_hz).ceil() as usize;
    let win = 2 * period;
    let max_lag = period;
    let min_lag = ((sr / range.max_hz).floor() as usize).max(2);
    let span = win + max_lag;
    if x.len() < span {
        return Err(Error::InputTooShort {
            len: x.len(),
            needed: span,
        });
    }
    let hop = ((frame_hop_s * sr).round() as usize).max(1);
    let count = (x.len() - span) / hop + 1;

    let fft_len = (span + win).next_power_of_two();
    let mut fft = RealFft::new(fft_len);
    let mut spec_a = Vec::new();
    let mut spec_b = Vec::new();
    let mut prod = vec![Complex64::new(0.0, 0.0); fft_len / 2 + 1];
    let mut xcorr = Vec::new();
    let mut r = vec![0.0; max_lag + 1];

    let mut times = Vec::with_capacity(count);
    let mut f0 = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * hop;
        let seg = &x[start..start + span];
        times.push((start as f64 + span as f64 / 2.0) / sr);

        let energy_a: f64 = seg[..win].iter().map(|v| v * v).sum();
        if energy_a / win as f64 <= SILENCE_POWER {
            f0.push(0.0);
            continue;
        }
        fft.forward_into(&seg[..win], &mut spec_a);
        fft.forward_into(seg, &mut spec_b);
        for i in 0..prod.len() {
            prod[i] = spec_a[i].conj() * spec_b[i];
        }
        fft.inverse_into(&prod, &mut xcorr);

        let mut energy_b: f64 = seg[..win].iter().map(|v| v * v).sum();
        for (lag, r_lag) in r.iter_mut().enumerate() {
            if lag > 0 {
                energy_b += seg[lag + win - 1].powi(2) - seg[lag - 1].powi(2);
            }
            let denom = (energy_a * energy_b.max(0.0)).sqrt();
            *r_lag = if denom > 0.0 { xcorr[lag] / denom } else { 0.0 };
        }
        f0.push(pick_period(&r, min_lag).map_or(0.0, |lag| {
            let hz = sr / lag;
            if hz >= range.min_hz && hz <= range.max_hz {
                hz
            } else {
                0.0
            }
        }));
    }
    Ok(F0Track {
        times,
        f0,
        frame_hop: hop as f64 / sr,
    })
}

/// Interpolated lag of the shortest strong periodicity peak, if voiced.
fn pick_period(r: &[f64], min_lag: usize) -> Option<f64> {
    let candidates: Vec<usize> = (min_lag.max(1)..r.len() - 1)
        .filter(|&l| r[l] >= r[l - 1] && r[l] > r[l + 1])
        .collect();
    let best = candidates.iter().map(|&l| r[l]).fold(f64::MIN, f64::max);
    if best < VOICING_THRESHOLD {
        return None;
    }
    let lag = *candidates
        .iter()
        .find(|&&l| r[l] >= OCTAVE_TOLERANCE * best)?;
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 1e-12 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(lag as f64 + delta)
}

/// Shifts every voiced frame onto a constant `target_hz`; unvoiced frames are
/// left unshifted. Per-frame corrections are linearly interpolated in time and
/// limited to one octave either way.
pub fn flatten_pitch(audio: &AudioBuffer, target_hz: f64, cfg: &StftConfig) -> Result<AudioBuffer> {
    let track = estimate_f0(audio, DEFAULT_FRAME_HOP_S, F0Range::default())?;
    if track.voiced_count() == 0 {
        return Err(Error::Unvoiced);
    }
    let points = track
        .times
        .iter()
        .zip(&track.f0)
        .map(|(&t, &f)| {
            let cents = if f > 0.0 {
                (1200.0 * (target_hz / f).log2()).clamp(-MAX_SHIFT_CENTS, MAX_SHIFT_CENTS)
            } else {
                0.0
            };
            (t, cents)
        })
        .collect();
    let correction = Breakpoints::new(points)?;
    let y = shift_with(audio.samples(), audio.sample_rate(), cfg, |t| Ok(correction.eval(t)))?;
    let mut out = AudioBuffer::from_raw(y, audio.sample_rate());
    out.clip();
    Ok(out)
}
