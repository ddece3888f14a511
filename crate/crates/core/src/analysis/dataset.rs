//! Joining profile and response tables and running the group analysis.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::bias::{bias, BiasReport};
use crate::analysis::kernel::{group_kernel_difference, Domain, ParticipantKernels, Trial};
use crate::analysis::stats::{group_stats, Correction, GroupStats};
use crate::error::{Error, Result};
use crate::experiment::{OptionLabels, ResponseRow};
use crate::profile::ProfileRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    #[default]
    Participant,
    Session,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub group_by: GroupBy,
    /// Option labels; inferred from the responses when absent.
    pub labels: Option<OptionLabels>,
    pub window_duration_s: f64,
    pub correction: Correction,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            group_by: GroupBy::Participant,
            labels: None,
            window_duration_s: 0.1,
            correction: Correction::None,
        }
    }
}

/// The two distinct choice labels in sorted order. Fails unless exactly two
/// labels occur.
pub fn infer_labels(responses: &[ResponseRow]) -> Result<OptionLabels> {
    let seen: BTreeSet<&str> = responses.iter().map(|r| r.choice.as_str()).collect();
    let mut it = seen.iter();
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => OptionLabels::new(*a, *b),
        _ => Err(Error::Malformed(format!(
            "cannot infer two option labels from responses, found {:?}; pass the labels explicitly",
            seen
        ))),
    }
}

/// Pairs each response with its profile by `(session_id, trial_index)` and
/// groups the resulting trials. Groups come back sorted by key. Profiles with
/// no response are ignored.
pub fn join_trials(
    profiles: &[ProfileRow],
    responses: &[ResponseRow],
    labels: &OptionLabels,
    group_by: GroupBy,
) -> Result<Vec<(String, Vec<Trial>)>> {
    let index: HashMap<(&str, usize), &ProfileRow> = profiles
        .iter()
        .map(|p| ((p.session_id.as_str(), p.trial_index), p))
        .collect();
    let mut seen = BTreeSet::new();
    let mut groups: BTreeMap<String, Vec<(usize, &str, Trial)>> = BTreeMap::new();
    for r in responses {
        if !seen.insert((r.session_id.as_str(), r.trial_index)) {
            return Err(Error::Malformed(format!(
                "duplicate response for session {} trial {}",
                r.session_id, r.trial_index
            )));
        }
        let profile = index
            .get(&(r.session_id.as_str(), r.trial_index))
            .ok_or_else(|| Error::MissingProfile {
                session: r.session_id.clone(),
                trial: r.trial_index,
            })?;
        let choice = labels
            .option_of(&r.choice)
            .ok_or_else(|| Error::InvalidChoice(r.choice.clone()))?;
        let key = match group_by {
            GroupBy::Participant => &r.participant_id,
            GroupBy::Session => &r.session_id,
        };
        groups.entry(key.clone()).or_default().push((
            r.trial_index,
            r.session_id.as_str(),
            Trial {
                pitch: profile.pitch.clone(),
                stretch: profile.stretch.clone(),
                choice,
            },
        ));
    }
    Ok(groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|x, y| (x.1, x.0).cmp(&(y.1, y.0)));
            (k, v.into_iter().map(|(_, _, t)| t).collect())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub labels: OptionLabels,
    pub segment_times: Vec<f64>,
    pub participants: Vec<ParticipantKernels>,
    pub bias: Vec<(String, BiasReport)>,
    pub overall_bias: BiasReport,
    pub pitch: GroupStats,
    pub rate: GroupStats,
    /// Cross-participant mean of `a - b`, pitch segments then rate segments.
    pub group_difference: Vec<f64>,
}

impl AnalysisResult {
    pub fn stats(&self, domain: Domain) -> &GroupStats {
        match domain {
            Domain::Pitch => &self.pitch,
            Domain::Rate => &self.rate,
        }
    }
}

/// Segment start times `k·window_duration_s`.
pub fn segment_axis(dim: usize, window_duration_s: f64) -> Vec<f64> {
    (0..dim).map(|k| k as f64 * window_duration_s).collect()
}

/// Kernels, statistics and bias for already grouped trials.
pub fn analyze_trials(
    groups: &[(String, Vec<Trial>)],
    labels: &OptionLabels,
    window_duration_s: f64,
    correction: Correction,
) -> Result<AnalysisResult> {
    let dim = groups
        .iter()
        .flat_map(|(_, t)| t.first())
        .map(|t| t.pitch.len())
        .next()
        .unwrap_or(0);
    let participants = groups
        .par_iter()
        .map(|(id, trials)| ParticipantKernels::compute(id.clone(), trials, labels))
        .collect::<Result<Vec<_>>>()?;
    let segment_times = segment_axis(dim, window_duration_s);
    let pitch = group_stats(&participants, Domain::Pitch, &segment_times, correction)?;
    let rate = group_stats(&participants, Domain::Rate, &segment_times, correction)?;
    let bias_per: Vec<(String, BiasReport)> = groups
        .iter()
        .map(|(id, t)| (id.clone(), bias(t.iter().map(|t| t.choice), labels)))
        .collect();
    let overall_bias = bias(groups.iter().flat_map(|(_, t)| t.iter().map(|t| t.choice)), labels);
    Ok(AnalysisResult {
        labels: labels.clone(),
        segment_times,
        group_difference: group_kernel_difference(&participants),
        participants,
        bias: bias_per,
        overall_bias,
        pitch,
        rate,
    })
}

/// Full analysis from the profile and response tables.
pub fn analyze(profiles: &[ProfileRow], responses: &[ResponseRow], opts: &AnalysisOptions) -> Result<AnalysisResult> {
    let labels = match &opts.labels {
        Some(l) => l.clone(),
        None => infer_labels(responses)?,
    };
    let groups = join_trials(profiles, responses, &labels, opts.group_by)?;
    analyze_trials(&groups, &labels, opts.window_duration_s, opts.correction)
}
