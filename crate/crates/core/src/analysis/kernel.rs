//! First-order classification images.
//!
//! A participant's kernel for one option is the per-segment mean of the
//! profiles they classified as that option. Each participant's pair of option
//! means is then divided by one shared scalar, the RMS over both vectors, so
//! the A-versus-B contrast survives normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{Choice, OptionLabels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Pitch,
    Rate,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Pitch, Domain::Rate];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Pitch => "pitch",
            Domain::Rate => "rate",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Domain::Pitch => "Pitch",
            Domain::Rate => "Speech rate",
        }
    }
}

/// One answered trial: its per-segment profile values and the option chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub pitch: Vec<f64>,
    pub stretch: Vec<f64>,
    pub choice: Choice,
}

impl Trial {
    pub fn values(&self, domain: Domain) -> &[f64] {
        match domain {
            Domain::Pitch => &self.pitch,
            Domain::Rate => &self.stretch,
        }
    }
}

/// Vectors for options A and B in one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl KernelPair {
    pub fn get(&self, option: Choice) -> &[f64] {
        match option {
            Choice::A => &self.a,
            Choice::B => &self.b,
        }
    }

    /// `a - b` per segment.
    pub fn difference(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a - b).collect()
    }
}

/// Conditional mean profiles per domain, with the number of trials per option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionMeans {
    pub pitch: KernelPair,
    pub rate: KernelPair,
    pub counts: [usize; 2],
}

impl OptionMeans {
    pub fn domain(&self, domain: Domain) -> &KernelPair {
        match domain {
            Domain::Pitch => &self.pitch,
            Domain::Rate => &self.rate,
        }
    }
}

/// Per-segment means of pitch (cents) and stretch (log2) values, conditioned
/// on the chosen option.
pub fn per_option_means(trials: &[Trial], labels: &OptionLabels) -> Result<OptionMeans> {
    let dim = trials.first().map_or(0, |t| t.pitch.len());
    let mut sums = [[vec![0.0; dim], vec![0.0; dim]], [vec![0.0; dim], vec![0.0; dim]]];
    let mut counts = [0usize; 2];
    for t in trials {
        for got in [t.pitch.len(), t.stretch.len()] {
            if got != dim {
                return Err(Error::DimensionMismatch { expected: dim, got });
            }
        }
        let o = t.choice as usize;
        counts[o] += 1;
        for k in 0..dim {
            sums[o][0][k] += t.pitch[k];
            sums[o][1][k] += t.stretch[k];
        }
    }
    for option in [Choice::A, Choice::B] {
        if counts[option as usize] == 0 {
            return Err(Error::DegenerateResponses(labels.get(option).to_string()));
        }
    }
    let [[pa, ra], [pb, rb]] = sums;
    let mean = |v: Vec<f64>, n: usize| v.into_iter().map(|s| s / n as f64).collect::<Vec<_>>();
    Ok(OptionMeans {
        pitch: KernelPair {
            a: mean(pa, counts[0]),
            b: mean(pb, counts[1]),
        },
        rate: KernelPair {
            a: mean(ra, counts[0]),
            b: mean(rb, counts[1]),
        },
        counts,
    })
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (ss, n) = values.fold((0.0, 0usize), |(ss, n), v| (ss + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (ss / n as f64).sqrt()
    }
}

/// Divides both option means by the RMS of their concatenation.
pub fn normalize_kernel_pair(mean_a: &[f64], mean_b: &[f64]) -> Result<KernelPair> {
    let scale = rms(mean_a.iter().chain(mean_b).copied());
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroKernel);
    }
    Ok(KernelPair {
        a: mean_a.iter().map(|v| v / scale).collect(),
        b: mean_b.iter().map(|v| v / scale).collect(),
    })
}

/// A participant's normalized pitch and rate kernel pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantKernels {
    pub participant_id: String,
    pub pitch: KernelPair,
    pub rate: KernelPair,
    pub counts: [usize; 2],
}

impl ParticipantKernels {
    pub fn compute(participant_id: impl Into<String>, trials: &[Trial], labels: &OptionLabels) -> Result<Self> {
        let means = per_option_means(trials, labels)?;
        Ok(ParticipantKernels {
            participant_id: participant_id.into(),
            pitch: normalize_kernel_pair(&means.pitch.a, &means.pitch.b)?,
            rate: normalize_kernel_pair(&means.rate.a, &means.rate.b)?,
            counts: means.counts,
        })
    }

    pub fn domain(&self, domain: Domain) -> &KernelPair {
        match domain {
            Domain::Pitch => &self.pitch,
            Domain::Rate => &self.rate,
        }
    }

    /// Individual kernels, pitch then rate, option A then B.
    pub fn kernels<'a>(&'a self, labels: &'a OptionLabels) -> impl Iterator<Item = Kernel> + 'a {
        Domain::ALL.into_iter().flat_map(move |domain| {
            [Choice::A, Choice::B].into_iter().map(move |option| Kernel {
                domain,
                option: labels.get(option).to_string(),
                values: self.domain(domain).get(option).to_vec(),
                participant_id: self.participant_id.clone(),
            })
        })
    }
}

/// One participant's normalized kernel for one option in one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub domain: Domain,
    pub option: String,
    pub values: Vec<f64>,
    pub participant_id: String,
}

/// Cross-participant mean of `a - b`, pitch segments followed by rate segments.
pub fn group_kernel_difference(participants: &[ParticipantKernels]) -> Vec<f64> {
    let Some(first) = participants.first() else {
        return Vec::new();
    };
    let dim = first.pitch.a.len() + first.rate.a.len();
    let mut acc = vec![0.0; dim];
    for p in participants {
        let diff = p.pitch.difference().into_iter().chain(p.rate.difference());
        for (s, d) in acc.iter_mut().zip(diff) {
            *s += d;
        }
    }
    acc.iter().map(|s| s / participants.len() as f64).collect()
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Reference direction for comparing a concatenated `[pitch, rate]` group
/// kernel difference with an observer template: each domain's weights scaled
/// to unit RMS, matching the per-domain kernel normalization. An all-zero
/// domain stays zero.
pub fn template_direction(pitch_template: &[f64], rate_template: &[f64]) -> Vec<f64> {
    let unit = |w: &[f64]| {
        let r = rms(w.iter().copied());
        w.iter()
            .map(|v| if r > 0.0 { v / r } else { 0.0 })
            .collect::<Vec<_>>()
    };
    let mut out = unit(pitch_template);
    out.extend(unit(rate_template));
    out
}
