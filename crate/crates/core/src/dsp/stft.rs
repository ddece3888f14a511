//! Short-time Fourier transform with weighted overlap-add resynthesis.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Tapering function used for both analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hann,
    Hamming,
}

impl WindowKind {
    /// Periodic (DFT-even) window of length `n`.
    pub fn build(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let c = (2.0 * PI * i as f64 / nf).cos();
                match self {
                    WindowKind::Hann => 0.5 - 0.5 * c,
                    WindowKind::Hamming => 0.54 - 0.46 * c,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_size: 2048,
            hop: 512,
            window: WindowKind::Hann,
        }
    }
}

/// Largest tolerated relative ripple of the squared-window overlap sum.
pub const COLA_TOLERANCE: f64 = 1e-6;

impl StftConfig {
    pub fn new(window_size: usize, hop: usize, window: WindowKind) -> Result<Self> {
        let cfg = StftConfig {
            window_size,
            hop,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `window_size` with the default quarter-window hop.
    pub fn with_window_size(window_size: usize) -> Result<Self> {
        Self::new(window_size, window_size / 4, WindowKind::Hann)
    }

    pub fn bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 4 || !self.window_size.is_power_of_two() {
            return Err(Error::InvalidStftConfig(format!(
                "window size {} is not a power of two >= 4",
                self.window_size
            )));
        }
        if self.hop == 0 || self.hop > self.window_size {
            return Err(Error::InvalidStftConfig(format!(
                "hop {} must be in 1..={}",
                self.hop, self.window_size
            )));
        }
        let (_, ripple) = self.overlap_sum();
        if ripple > COLA_TOLERANCE {
            return Err(Error::InvalidStftConfig(format!(
                "{:?} window with hop {} is not overlap-add constant (ripple {ripple:.2e})",
                self.window, self.hop
            )));
        }
        Ok(())
    }

    /// Mean and relative ripple of the steady-state sum of squared windows
    /// shifted by multiples of the hop.
    pub fn overlap_sum(&self) -> (f64, f64) {
        let w = self.window.build(self.window_size);
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| {
                (n..self.window_size)
                    .step_by(self.hop)
                    .map(|i| w[i] * w[i])
                    .sum()
            })
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let spread = sums
            .iter()
            .map(|s| (s - mean).abs())
            .fold(0.0, f64::max);
        (mean, spread / mean)
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_size {
            0
        } else {
            (len - self.window_size) / self.hop + 1
        }
    }
}

/// Forward/inverse FFT pair for real signals of one fixed length.
pub(crate) struct RealFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RealFft {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        RealFft {
            n,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// Half spectrum (`n/2 + 1` bins) of `input`, zero-padded to `n`.
    pub(crate) fn forward_into(&mut self, input: &[f64], out: &mut Vec<Complex64>) {
        for (i, b) in self.buf.iter_mut().enumerate() {
            *b = Complex64::new(input.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        out.clear();
        out.extend_from_slice(&self.buf[..self.n / 2 + 1]);
    }

    /// Real signal whose half spectrum is `half`, scaled by `1/n`.
    pub(crate) fn inverse_into(&mut self, half: &[Complex64], out: &mut Vec<f64>) {
        let n = self.n;
        self.buf[..half.len()].copy_from_slice(half);
        for k in 1..n - n / 2 {
            self.buf[n - k] = half[k].conj();
        }
        self.buf[0].im = 0.0;
        self.buf[n / 2].im = 0.0;
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / n as f64;
        out.clear();
        out.extend(self.buf.iter().map(|c| c.re * scale));
    }
}

/// Complex spectra of successive windowed frames, `window_size/2 + 1` bins each.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    let x = audio.samples();
    if x.len() < cfg.window_size {
        return Err(Error::InputTooShort {
            len: x.len(),
            needed: cfg.window_size,
        });
    }
    let window = cfg.window.build(cfg.window_size);
    let mut fft = RealFft::new(cfg.window_size);
    let mut frame = vec![0.0; cfg.window_size];
    let count = cfg.frame_count(x.len());
    let mut frames = Vec::with_capacity(count);
    for m in 0..count {
        let start = m * cfg.hop;
        for (i, f) in frame.iter_mut().enumerate() {
            *f = x[start + i] * window[i];
        }
        let mut spec = Vec::with_capacity(cfg.bins());
        fft.forward_into(&frame, &mut spec);
        frames.push(spec);
    }
    Ok(frames)
}

/// Overlap-adds synthesis-windowed inverse frames and divides by the constant
/// squared-window overlap sum.
///
/// Output length is `(frames - 1) * hop + window_size`; no frames gives an
/// empty buffer.
pub fn istft(frames: &[Vec<Complex64>], cfg: &StftConfig, sample_rate: u32) -> Result<AudioBuffer> {
    cfg.validate()?;
    if let Some(bad) = frames.iter().find(|f| f.len() != cfg.bins()) {
        return Err(Error::FrameMismatch {
            expected: cfg.bins(),
            got: bad.len(),
        });
    }
    if frames.is_empty() {
        return Ok(AudioBuffer::from_raw(Vec::new(), sample_rate));
    }
    let n = cfg.window_size;
    let window = cfg.window.build(n);
    let (norm, _) = cfg.overlap_sum();
    let mut out = vec![0.0; (frames.len() - 1) * cfg.hop + n];
    let mut fft = RealFft::new(n);
    let mut time = Vec::with_capacity(n);
    for (m, spec) in frames.iter().enumerate() {
        fft.inverse_into(spec, &mut time);
        let start = m * cfg.hop;
        for i in 0..n {
            out[start + i] += time[i] * window[i] / norm;
        }
    }
    Ok(AudioBuffer::from_raw(out, sample_rate))
}
