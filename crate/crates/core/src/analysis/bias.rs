//! Response bias: how often each option was chosen.

use serde::{Deserialize, Serialize};

use crate::experiment::{Choice, OptionLabels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub labels: OptionLabels,
    pub counts: [usize; 2],
    pub proportions: [f64; 2],
    pub n_trials: usize,
}

impl BiasReport {
    pub fn count(&self, option: Choice) -> usize {
        self.counts[option as usize]
    }

    pub fn proportion(&self, option: Choice) -> f64 {
        self.proportions[option as usize]
    }
}

/// Counts and proportions per option. An empty response set reports zero
/// proportions.
pub fn bias(choices: impl IntoIterator<Item = Choice>, labels: &OptionLabels) -> BiasReport {
    let mut counts = [0usize; 2];
    for c in choices {
        counts[c as usize] += 1;
    }
    let n = counts[0] + counts[1];
    let prop = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    BiasReport {
        labels: labels.clone(),
        counts,
        proportions: [prop(counts[0]), prop(counts[1])],
        n_trials: n,
    }
}
