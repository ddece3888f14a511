//! Phase vocoder with time-varying stretch, and pitch shifting built on it.
//!
//! The vocoder keeps a fixed synthesis hop and moves through the input with a
//! variable analysis hop `hop / 2^stretch(t)`. Phases are propagated from each
//! spectral peak's instantaneous frequency and the bins around a peak are
//! locked to it (identity phase locking). With a zero stretch every synthesis
//! phase equals its analysis phase, so the identity transform reconstructs the
//! input exactly up to window-sum normalization.
//!
//! Pitch shifting stretches by the pitch ratio and then resamples along the
//! vocoder's own time map, which brings the duration back to the original and
//! scales every frequency by `2^(cents/1200)`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::audio::AudioBuffer;
use crate::bpf::Breakpoints;
use crate::dsp::stft::{RealFft, StftConfig};
use crate::error::{Error, Result};

/// Largest supported `|log2 duration factor|`.
pub const MAX_STRETCH_LOG2: f64 = 2.0;
/// Largest supported `|pitch shift|` in cents.
pub const MAX_SHIFT_CENTS: f64 = 1200.0;

/// Monotone piecewise-linear correspondence between input and output sample
/// positions, as produced by the vocoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    anchors: Vec<(f64, f64)>,
}

impl TimeMap {
    fn identity() -> Self {
        TimeMap {
            anchors: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Output position of input sample position `input`.
    pub fn forward(&self, input: f64) -> f64 {
        interp(&self.anchors, input, |a| a.0, |a| a.1)
    }

    /// Input position of output sample position `output`.
    pub fn inverse(&self, output: f64) -> f64 {
        interp(&self.anchors, output, |a| a.1, |a| a.0)
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }
}

fn interp(
    anchors: &[(f64, f64)],
    x: f64,
    key: impl Fn(&(f64, f64)) -> f64,
    val: impl Fn(&(f64, f64)) -> f64,
) -> f64 {
    let n = anchors.len();
    // linear extrapolation off either end using the nearest segment
    let i = anchors
        .partition_point(|a| key(a) <= x)
        .clamp(1, n - 1);
    let (a0, a1) = (&anchors[i - 1], &anchors[i]);
    let (x0, x1) = (key(a0), key(a1));
    val(a0) + (val(a1) - val(a0)) * (x - x0) / (x1 - x0)
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Stretches `x` so that the local duration factor around input time `t`
/// (seconds) is `2^stretch_at(t)`.
///
/// Returns the stretched signal (unclipped) and the input-to-output time map.
pub(crate) fn vocode(
    x: &[f64],
    sample_rate: u32,
    cfg: &StftConfig,
    stretch_at: impl Fn(f64) -> Result<f64>,
) -> Result<(Vec<f64>, TimeMap)> {
    cfg.validate()?;
    if x.is_empty() {
        return Ok((Vec::new(), TimeMap::identity()));
    }
    let n = cfg.window_size;
    let half = n / 2;
    let hop_s = cfg.hop as f64;
    let bins = cfg.bins();
    let sr = sample_rate as f64;
    let len = x.len() as f64;

    let max_analysis_hop = (hop_s * 2f64.powf(MAX_STRETCH_LOG2)).ceil() as usize;
    let mut padded = vec![0.0; half];
    padded.extend_from_slice(x);
    padded.resize(padded.len() + n + max_analysis_hop + 1, 0.0);

    let window = cfg.window.build(n);
    let expected: Vec<f64> = (0..bins).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let mut fft = RealFft::new(n);

    let mut frame = vec![0.0; n];
    let mut spec = Vec::with_capacity(bins);
    let mut mag = vec![0.0; bins];
    let mut phase = vec![0.0; bins];
    let mut prev_phase = vec![0.0; bins];
    let mut synth_phase = vec![0.0; bins];
    let mut inst_freq = vec![0.0; bins];
    let mut peaks: Vec<usize> = Vec::new();
    let mut out_spec = vec![Complex64::new(0.0, 0.0); bins];
    let mut time = Vec::with_capacity(n);

    let mut out: Vec<f64> = Vec::new();
    let mut wsum: Vec<f64> = Vec::new();
    let mut anchors = Vec::new();

    let mut pos = 0.0_f64;
    let mut prev_start: Option<usize> = None;
    let mut m = 0usize;
    while pos < len {
        anchors.push((pos, m as f64 * hop_s));
        let start = pos.round() as usize;
        for i in 0..n {
            frame[i] = padded[start + i] * window[i];
        }
        fft.forward_into(&frame, &mut spec);
        for k in 0..bins {
            mag[k] = spec[k].norm();
            phase[k] = spec[k].arg();
        }

        match prev_start {
            None => synth_phase.copy_from_slice(&phase),
            Some(ps) => {
                let analysis_hop = (start - ps) as f64;
                for k in 0..bins {
                    let dev = wrap_phase(phase[k] - prev_phase[k] - expected[k] * analysis_hop);
                    inst_freq[k] = expected[k] + dev / analysis_hop;
                }
                find_peaks(&mag, &mut peaks);
                if peaks.is_empty() {
                    for k in 0..bins {
                        synth_phase[k] = wrap_phase(synth_phase[k] + hop_s * inst_freq[k]);
                    }
                } else {
                    for &p in &peaks {
                        synth_phase[p] = wrap_phase(synth_phase[p] + hop_s * inst_freq[p]);
                    }
                    lock_to_peaks(&peaks, &phase, &mut synth_phase);
                }
            }
        }
        prev_phase.copy_from_slice(&phase);
        prev_start = Some(start);

        for k in 0..bins {
            out_spec[k] = Complex64::from_polar(mag[k], synth_phase[k]);
        }
        fft.inverse_into(&out_spec, &mut time);
        let out_start = m * cfg.hop;
        if out.len() < out_start + n {
            out.resize(out_start + n, 0.0);
            wsum.resize(out_start + n, 0.0);
        }
        for i in 0..n {
            out[out_start + i] += time[i] * window[i];
            wsum[out_start + i] += window[i] * window[i];
        }

        let s = stretch_at(pos / sr)?;
        if !s.is_finite() || s.abs() > MAX_STRETCH_LOG2 {
            return Err(Error::StretchOutOfRange(s));
        }
        pos += hop_s * 2f64.powf(-s);
        m += 1;
    }
    anchors.push((pos, m as f64 * hop_s));
    let map = TimeMap { anchors };

    let out_len = map.forward(len).round().max(0.0) as usize;
    let steady = cfg.overlap_sum().0;
    let floor = 1e-3 * steady;
    let y = (0..out_len)
        .map(|j| {
            let idx = half + j;
            match (out.get(idx), wsum.get(idx)) {
                (Some(&v), Some(&w)) if w > floor => v / w,
                _ => 0.0,
            }
        })
        .collect();
    Ok((y, map))
}

/// Local magnitude maxima over a +/-2 bin neighbourhood.
fn find_peaks(mag: &[f64], peaks: &mut Vec<usize>) {
    peaks.clear();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return;
    }
    let threshold = max * 1e-6;
    let n = mag.len();
    for k in 0..n {
        let v = mag[k];
        if v <= threshold {
            continue;
        }
        let lo = k.saturating_sub(2);
        let hi = (k + 2).min(n - 1);
        if (lo..=hi).all(|j| j == k || mag[j] < v || (mag[j] == v && j > k)) {
            peaks.push(k);
        }
    }
}

/// Sets each non-peak bin's synthesis phase relative to the peak whose region
/// it falls in, preserving the analysis phase offset to that peak.
fn lock_to_peaks(peaks: &[usize], analysis: &[f64], synth: &mut [f64]) {
    let n = analysis.len();
    for (i, &p) in peaks.iter().enumerate() {
        let lo = if i == 0 { 0 } else { (peaks[i - 1] + p) / 2 + 1 };
        let hi = if i + 1 == peaks.len() {
            n - 1
        } else {
            (p + peaks[i + 1]) / 2
        };
        let offset = synth[p] - analysis[p];
        for k in lo..=hi {
            if k != p {
                synth[k] = analysis[k] + offset;
            }
        }
    }
}

/// Cubic (Catmull-Rom) read of `y` at fractional position `pos`, zero outside.
fn cubic_at(y: &[f64], pos: f64) -> f64 {
    let i = pos.floor();
    let f = pos - i;
    let i = i as isize;
    let at = |k: isize| {
        if k < 0 || k as usize >= y.len() {
            0.0
        } else {
            y[k as usize]
        }
    };
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    p1 + 0.5
        * f
        * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
}

/// Pitch shift by `cents_at(t)` (t in seconds of the input), keeping duration.
///
/// Returns the unclipped output.
pub(crate) fn shift_with(
    x: &[f64],
    sample_rate: u32,
    cfg: &StftConfig,
    cents_at: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let (stretched, map) = vocode(x, sample_rate, cfg, |t| {
        let c = cents_at(t)?;
        if !c.is_finite() || c.abs() > MAX_SHIFT_CENTS {
            return Err(Error::ShiftOutOfRange(c));
        }
        Ok(c / 1200.0)
    })?;
    // TODO: band-limit before reading faster than real time (upward shifts)
    // to suppress aliasing above the new Nyquist.
    Ok((0..x.len())
        .map(|j| cubic_at(&stretched, map.forward(j as f64)))
        .collect())
}

fn finish(samples: Vec<f64>, sample_rate: u32) -> AudioBuffer {
    let mut audio = AudioBuffer::from_raw(samples, sample_rate);
    audio.clip();
    audio
}

/// Time-stretches `audio` by the log2 duration profile `stretch` (seconds ->
/// log2 factor). Output is hard-clipped into `[-1, 1]`.
pub fn time_stretch(audio: &AudioBuffer, stretch: &Breakpoints, cfg: &StftConfig) -> Result<AudioBuffer> {
    if stretch.max_abs() > MAX_STRETCH_LOG2 {
        return Err(Error::StretchOutOfRange(stretch.max_abs()));
    }
    let (y, _) = vocode(audio.samples(), audio.sample_rate(), cfg, |t| Ok(stretch.eval(t)))?;
    Ok(finish(y, audio.sample_rate()))
}

/// Shifts pitch by the cents profile `pitch` (seconds -> cents) while keeping
/// the duration. Output is hard-clipped into `[-1, 1]`.
pub fn pitch_shift(audio: &AudioBuffer, pitch: &Breakpoints, cfg: &StftConfig) -> Result<AudioBuffer> {
    if pitch.max_abs() > MAX_SHIFT_CENTS {
        return Err(Error::ShiftOutOfRange(pitch.max_abs()));
    }
    let y = shift_with(audio.samples(), audio.sample_rate(), cfg, |t| Ok(pitch.eval(t)))?;
    Ok(finish(y, audio.sample_rate()))
}

/// A rendered stimulus and the number of samples hard-clipped to produce it.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub audio: AudioBuffer,
    pub clipped_samples: usize,
}

/// Applies a duration profile and then a pitch profile, both defined on the
/// timeline of the input recording.
///
/// The pitch profile is carried through the stretch's time map, so a pitch
/// breakpoint at input time `t` lands on the stretched position of `t`.
pub fn apply_profiles(
    audio: &AudioBuffer,
    pitch: &Breakpoints,
    stretch: &Breakpoints,
    cfg: &StftConfig,
) -> Result<Rendered> {
    if stretch.max_abs() > MAX_STRETCH_LOG2 {
        return Err(Error::StretchOutOfRange(stretch.max_abs()));
    }
    if pitch.max_abs() > MAX_SHIFT_CENTS {
        return Err(Error::ShiftOutOfRange(pitch.max_abs()));
    }
    let sr = audio.sample_rate();
    let srf = sr as f64;
    let (stretched, map) = vocode(audio.samples(), sr, cfg, |t| Ok(stretch.eval(t)))?;
    let shifted = shift_with(&stretched, sr, cfg, |tau| {
        Ok(pitch.eval(map.inverse(tau * srf) / srf))
    })?;
    let mut audio = AudioBuffer::from_raw(shifted, sr);
    let clipped_samples = audio.clip();
    Ok(Rendered {
        audio,
        clipped_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::normalized_correlation;

    #[test]
    fn wrap_phase_range() {
        for p in [-10.0, -PI, 0.0, 3.0, 7.5, 100.0] {
            let w = wrap_phase(p);
            assert!(w.abs() <= PI + 1e-12);
            assert!(((p - w) / (2.0 * PI)).fract().abs() < 1e-9);
        }
    }

    #[test]
    fn time_map_inverts() {
        let map = TimeMap {
            anchors: vec![(0.0, 0.0), (256.0, 512.0), (1280.0, 1024.0)],
        };
        for x in [0.0, 100.0, 256.0, 700.0, 2000.0] {
            assert!((map.inverse(map.forward(x)) - x).abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_reproduces_samples_and_lines() {
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        assert_eq!(cubic_at(&y, 4.0), 9.0);
        assert!((cubic_at(&y, 4.25) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn identity_stretch_is_exact_in_the_interior() {
        let a = AudioBuffer::from_fn(22050, 44100, |t| {
            0.3 * (2.0 * PI * 220.0 * t).sin() + 0.2 * (2.0 * PI * 1330.0 * t).sin()
        });
        let (y, _) = vocode(a.samples(), 44100, &StftConfig::default(), |_| Ok(0.0)).unwrap();
        assert_eq!(y.len(), a.len());
        let c = normalized_correlation(a.samples(), &y);
        assert!(c > 0.9999, "{c}");
    }

    #[test]
    fn out_of_range_profiles_are_rejected() {
        let a = AudioBuffer::silence(4096, 44100);
        let cfg = StftConfig::default();
        let err = time_stretch(&a, &Breakpoints::constant(2.5), &cfg).unwrap_err();
        assert!(err.to_string().contains("stretch out of supported range"));
        let err = pitch_shift(&a, &Breakpoints::constant(-1300.0), &cfg).unwrap_err();
        assert!(err.to_string().contains("shift out of supported range"));
    }

    #[test]
    fn empty_input_passes_through() {
        let a = AudioBuffer::silence(0, 44100);
        let y = time_stretch(&a, &Breakpoints::constant(1.0), &StftConfig::default()).unwrap();
        assert!(y.is_empty());
    }

    #[test]
    fn peaks_and_locking_regions() {
        let mag = [0.0, 1.0, 5.0, 1.0, 0.0, 0.5, 3.0, 0.5, 0.0];
        let mut peaks = Vec::new();
        find_peaks(&mag, &mut peaks);
        assert_eq!(peaks, vec![2, 6]);
        let analysis = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let mut synth = [0.0; 9];
        synth[2] = 1.3;
        synth[6] = 2.7;
        lock_to_peaks(&peaks, &analysis, &mut synth);
        assert!((synth[0] - 1.1).abs() < 1e-12);
        assert!((synth[4] - 1.5).abs() < 1e-12);
        assert!((synth[5] - 2.6).abs() < 1e-12);
        assert!((synth[8] - 2.9).abs() < 1e-12);
    }
}
