//! Simulated listeners with a known linear decision template.
//!
//! The decision variable is
//! `d = pitch_template·pitch_cents + rate_template·stretch_log2 + noise_sd·z + bias`
//! with `z ~ N(0, 1)`, and the observer answers option A when `d > 0`.
//! Profile values enter in their raw units. Under this model the expected
//! classification image is proportional to the template, which makes these
//! observers the ground truth for checking kernel recovery.

use chrono::{DateTime, Utc};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{Choice, OptionLabels, ResponseRecord};
use crate::profile::{SamplingSpec, TransformProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTemplateObserver {
    pub pitch_template: Vec<f64>,
    pub rate_template: Vec<f64>,
    pub noise_sd: f64,
    #[serde(default)]
    pub bias: f64,
}

impl LinearTemplateObserver {
    pub fn new(pitch_template: Vec<f64>, rate_template: Vec<f64>, noise_sd: f64, bias: f64) -> Result<Self> {
        let obs = LinearTemplateObserver {
            pitch_template,
            rate_template,
            noise_sd,
            bias,
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Observer whose internal noise SD equals the SD of its own template
    /// response under `spec`, i.e. a signal-to-noise ratio of one.
    pub fn matched_noise(pitch_template: Vec<f64>, rate_template: Vec<f64>, spec: &SamplingSpec) -> Result<Self> {
        let noise_sd = template_response_sd(&pitch_template, &rate_template, spec);
        Self::new(pitch_template, rate_template, noise_sd, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pitch_template.len() != self.rate_template.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pitch_template.len(),
                got: self.rate_template.len(),
            });
        }
        if !(self.noise_sd >= 0.0) || !self.bias.is_finite() {
            return Err(Error::Malformed("noise_sd must be >= 0 and bias finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.pitch_template.len()
    }

    /// Decision variable for a given standard-normal noise draw `z`.
    pub fn decision_variable(&self, pitch: &[f64], stretch: &[f64], z: f64) -> Result<f64> {
        for got in [pitch.len(), stretch.len()] {
            if got != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got,
                });
            }
        }
        let dot = |w: &[f64], x: &[f64]| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        Ok(dot(&self.pitch_template, pitch) + dot(&self.rate_template, stretch) + self.noise_sd * z + self.bias)
    }

    pub fn decide_values<R: Rng + ?Sized>(&self, pitch: &[f64], stretch: &[f64], rng: &mut R) -> Result<Choice> {
        let z: f64 = StandardNormal.sample(rng);
        let d = self.decision_variable(pitch, stretch, z)?;
        Ok(if d > 0.0 { Choice::A } else { Choice::B })
    }

    /// Draws exactly one standard-normal sample from `rng` per call.
    pub fn decide<R: Rng + ?Sized>(&self, profile: &TransformProfile, rng: &mut R) -> Result<Choice> {
        self.decide_values(&profile.pitch_values(), &profile.stretch_values(), rng)
    }
}

/// Variance of `N(0, σ²)` saturated at `±clip_sigmas·σ`.
pub fn saturated_variance(sigma: f64, clip_sigmas: f64) -> f64 {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    let n = Normal::standard();
    let c = clip_sigmas;
    let tail = 1.0 - n.cdf(c);
    sigma * sigma * ((1.0 - 2.0 * tail) - 2.0 * c * n.pdf(c) + 2.0 * c * c * tail)
}

/// SD of the noiseless decision variable over profiles drawn from `spec`.
pub fn template_response_sd(pitch_template: &[f64], rate_template: &[f64], spec: &SamplingSpec) -> f64 {
    let vp = saturated_variance(spec.pitch_sigma_cents, spec.clip_sigmas);
    let vr = saturated_variance(spec.rate_sigma_log2, spec.clip_sigmas);
    let ss = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
    (vp * ss(pitch_template) + vr * ss(rate_template)).sqrt()
}

/// Answers every trial in order. Records carry `rt_ms = 0` and `timestamp`.
pub fn simulate_session<'a, R: Rng + ?Sized>(
    observer: &LinearTemplateObserver,
    profiles: impl IntoIterator<Item = &'a TransformProfile>,
    labels: &OptionLabels,
    timestamp: DateTime<Utc>,
    rng: &mut R,
) -> Result<Vec<ResponseRecord>> {
    profiles
        .into_iter()
        .enumerate()
        .map(|(trial_index, p)| {
            let choice = observer.decide(p, rng)?;
            Ok(ResponseRecord {
                trial_index,
                choice: labels.get(choice).to_string(),
                rt_ms: 0.0,
                timestamp,
            })
        })
        .collect()
}
