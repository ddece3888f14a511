use std::path::PathBuf;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::profile::{SamplingSpec, StimulusKind, TransformProfile};

/// The two answer labels of a task. Index 0 is option A, index 1 option B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[String; 2]", into = "[String; 2]")]
pub struct OptionLabels([String; 2]);

impl OptionLabels {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidStimulus("option labels must be non-empty".into()));
        }
        if a == b {
            return Err(Error::InvalidStimulus(format!("option labels must differ, both are {a:?}")));
        }
        Ok(OptionLabels([a, b]))
    }

    pub fn a(&self) -> &str {
        &self.0[0]
    }

    pub fn b(&self) -> &str {
        &self.0[1]
    }

    pub fn get(&self, option: Choice) -> &str {
        match option {
            Choice::A => self.a(),
            Choice::B => self.b(),
        }
    }

    pub fn option_of(&self, label: &str) -> Option<Choice> {
        if label == self.a() {
            Some(Choice::A)
        } else if label == self.b() {
            Some(Choice::B)
        } else {
            None
        }
    }
}

impl TryFrom<[String; 2]> for OptionLabels {
    type Error = Error;

    fn try_from([a, b]: [String; 2]) -> Result<Self> {
        OptionLabels::new(a, b)
    }
}

impl From<OptionLabels> for [String; 2] {
    fn from(l: OptionLabels) -> Self {
        l.0
    }
}

/// Canonical response option, independent of on-screen position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choice {
    A,
    B,
}

/// Left-to-right presentation order of the two options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionOrder {
    AB,
    BA,
}

impl OptionOrder {
    /// `[left, right]` labels as shown to the listener.
    pub fn present<'a>(&self, labels: &'a OptionLabels) -> [&'a str; 2] {
        match self {
            OptionOrder::AB => [labels.a(), labels.b()],
            OptionOrder::BA => [labels.b(), labels.a()],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OptionOrder::AB => "AB",
            OptionOrder::BA => "BA",
        }
    }
}

/// Definition of a base recording and its answer options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub id: String,
    pub base_audio: PathBuf,
    pub kind: StimulusKind,
    pub option_labels: OptionLabels,
    /// Start of the target word in the base recording; 0 for isolated words.
    #[serde(default)]
    pub target_onset_s: f64,
}

impl StimulusSet {
    pub fn validate(&self, base_duration_s: f64) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidStimulus("empty stimulus id".into()));
        }
        if !(self.target_onset_s >= 0.0 && self.target_onset_s < base_duration_s) {
            return Err(Error::InvalidStimulus(format!(
                "target onset {} s outside base recording of {base_duration_s} s",
                self.target_onset_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub trial_index: usize,
    pub seed: u64,
    pub profile: TransformProfile,
    /// Rendered audio, relative to the session directory.
    pub stimulus_path: String,
    #[serde(default)]
    pub clipped_samples: usize,
}

/// Immutable description of a built session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub participant_id: String,
    pub stimulus: StimulusSet,
    pub option_order: OptionOrder,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Sampling parameters; each trial overrides the seed with its own.
    pub sampling: SamplingSpec,
    pub stft: StftConfig,
    pub trials: Vec<TrialPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub trial_index: usize,
    /// Canonical option label, never the screen position.
    pub choice: String,
    /// Milliseconds from the end of playback to the click.
    pub rt_ms: f64,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Created,
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub manifest: SessionManifest,
    pub responses: Vec<ResponseRecord>,
}

impl Session {
    pub fn new(manifest: SessionManifest) -> Self {
        Session {
            manifest,
            responses: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.manifest.session_id
    }

    pub fn n_trials(&self) -> usize {
        self.manifest.n_trials
    }

    pub fn labels(&self) -> &OptionLabels {
        &self.manifest.stimulus.option_labels
    }

    pub fn answered(&self) -> usize {
        self.responses.len()
    }

    pub fn status(&self) -> SessionStatus {
        match self.responses.len() {
            0 => SessionStatus::Created,
            n if n >= self.n_trials() => SessionStatus::Complete,
            _ => SessionStatus::Running,
        }
    }

    /// Index of the trial awaiting a response, if any.
    pub fn current_trial(&self) -> Option<usize> {
        let k = self.responses.len();
        (k < self.n_trials()).then_some(k)
    }

    /// Checks that `(trial_index, choice, rt_ms)` may be recorded next and
    /// builds the record without mutating the session.
    pub fn validate_response(
        &self,
        trial_index: usize,
        choice: &str,
        rt_ms: f64,
        timestamp: DateTime<Utc>,
    ) -> Result<ResponseRecord> {
        if trial_index >= self.n_trials() {
            return Err(Error::TrialOutOfRange {
                index: trial_index,
                n_trials: self.n_trials(),
            });
        }
        if trial_index < self.responses.len() {
            return Err(Error::AlreadyAnswered(trial_index));
        }
        if trial_index != self.responses.len() {
            return Err(Error::NotCurrentTrial {
                expected: self.responses.len(),
                got: trial_index,
            });
        }
        if self.labels().option_of(choice).is_none() {
            return Err(Error::InvalidChoice(choice.to_string()));
        }
        if !(rt_ms >= 0.0) || !rt_ms.is_finite() {
            return Err(Error::Malformed(format!("rt_ms must be a non-negative number, got {rt_ms}")));
        }
        Ok(ResponseRecord {
            trial_index,
            choice: choice.to_string(),
            rt_ms,
            timestamp,
        })
    }

    /// In-memory record; see [`crate::experiment::SessionDir`] for the
    /// persisted variant.
    pub fn record_response(&mut self, trial_index: usize, choice: &str, rt_ms: f64) -> Result<&ResponseRecord> {
        let rec = self.validate_response(trial_index, choice, rt_ms, Utc::now())?;
        self.responses.push(rec);
        Ok(self.responses.last().expect("just pushed"))
    }
}

pub const RESPONSE_CSV_HEADER: [&str; 8] = [
    "session_id",
    "participant_id",
    "stimulus_id",
    "option_order",
    "trial_index",
    "choice",
    "rt_ms",
    "timestamp",
];

/// Writes the response table of `sessions`, ordered by session id and then
/// trial index. Formatting is stable, so re-exports are byte-identical.
pub fn export_responses<'a, W: std::io::Write>(
    sessions: impl IntoIterator<Item = &'a Session>,
    writer: W,
) -> Result<()> {
    let mut sessions: Vec<&Session> = sessions.into_iter().collect();
    sessions.sort_by(|a, b| a.id().cmp(b.id()));
    let mut rows = Vec::new();
    for s in sessions {
        let mut records: Vec<&ResponseRecord> = s.responses.iter().collect();
        records.sort_by_key(|r| r.trial_index);
        rows.extend(records.into_iter().map(|r| ResponseRow::new(&s.manifest, r)));
    }
    write_response_csv(writer, &rows)
}

/// One row of an exported response table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub session_id: String,
    pub participant_id: String,
    pub stimulus_id: String,
    pub option_order: String,
    pub trial_index: usize,
    pub choice: String,
    pub rt_ms: f64,
    pub timestamp: String,
}

impl ResponseRow {
    pub fn new(manifest: &SessionManifest, record: &ResponseRecord) -> Self {
        ResponseRow {
            session_id: manifest.session_id.clone(),
            participant_id: manifest.participant_id.clone(),
            stimulus_id: manifest.stimulus.id.clone(),
            option_order: manifest.option_order.as_str().to_string(),
            trial_index: record.trial_index,
            choice: record.choice.clone(),
            rt_ms: record.rt_ms,
            timestamp: record.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
        }
    }
}

/// Writes `rows` in the given order under [`RESPONSE_CSV_HEADER`].
pub fn write_response_csv<W: std::io::Write>(writer: W, rows: &[ResponseRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESPONSE_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.session_id.as_str(),
            r.participant_id.as_str(),
            r.stimulus_id.as_str(),
            r.option_order.as_str(),
            &r.trial_index.to_string(),
            &r.choice,
            &r.rt_ms.to_string(),
            &r.timestamp,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<response csv>", e))?;
    Ok(())
}

pub fn read_response_csv<R: std::io::Read>(reader: R) -> Result<Vec<ResponseRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
