//! Random per-trial pitch and duration profiles.
//!
//! A profile holds one pitch value (cents) and one duration value (log2 of
//! the local duration factor) per 100 ms window, placed at window centres and
//! linearly interpolated in between. Values are drawn i.i.d. from a zero-mean
//! Gaussian and saturated at `±clip_sigmas·σ`.
//!
//! Trials are regenerable from their seed alone: each profile is drawn from a
//! ChaCha20 stream seeded with [`SeedableRng::seed_from_u64`], and trial `i`
//! of a session uses `master_seed ^ i` (see [`trial_seed`]). All pitch values
//! are drawn first, then all duration values.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bpf::Breakpoints;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusKind {
    Word,
    Phrase,
}

impl StimulusKind {
    pub fn segment_count(self) -> usize {
        segment_count_for(self)
    }
}

/// Number of 100 ms manipulation windows: 4 for isolated words, 13 for phrases.
pub fn segment_count_for(kind: StimulusKind) -> usize {
    match kind {
        StimulusKind::Word => 4,
        StimulusKind::Phrase => 13,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub num_windows: usize,
    pub window_duration_s: f64,
    pub pitch_sigma_cents: f64,
    pub rate_sigma_log2: f64,
    pub clip_sigmas: f64,
    pub seed: u64,
}

impl SamplingSpec {
    /// 100 ms windows, σ = 100 cents for pitch and σ = 0.5 log2 units for
    /// duration, both saturated at ±2σ (so duration spans ×0.5 to ×2).
    pub fn for_kind(kind: StimulusKind, seed: u64) -> Self {
        SamplingSpec {
            num_windows: segment_count_for(kind),
            window_duration_s: 0.1,
            pitch_sigma_cents: 100.0,
            rate_sigma_log2: 0.5,
            clip_sigmas: 2.0,
            seed,
        }
    }

    /// Alternative preset reading the duration σ as a literal 1 % change
    /// (σ = log2(1.01)), instead of the ×2 / ×0.5 extremes of the default.
    pub fn one_percent_duration(kind: StimulusKind, seed: u64) -> Self {
        SamplingSpec {
            rate_sigma_log2: 1.01f64.log2(),
            ..Self::for_kind(kind, seed)
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SamplingSpec { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.num_windows == 0 {
            return bad("num_windows must be >= 1");
        }
        if !(self.window_duration_s > 0.0) {
            return bad("window_duration_s must be positive");
        }
        if !(self.pitch_sigma_cents > 0.0) || !(self.rate_sigma_log2 > 0.0) {
            return bad("sigmas must be positive");
        }
        if !(self.clip_sigmas > 0.0) {
            return bad("clip_sigmas must be positive");
        }
        Ok(())
    }

    /// Breakpoint times: the centre of each window.
    pub fn breakpoint_times(&self) -> Vec<f64> {
        (0..self.num_windows)
            .map(|k| (k as f64 + 0.5) * self.window_duration_s)
            .collect()
    }

    /// Nominal start time of each window on the base recording's timeline.
    pub fn segment_times(&self) -> Vec<f64> {
        (0..self.num_windows)
            .map(|k| k as f64 * self.window_duration_s)
            .collect()
    }

    pub fn pitch_limit(&self) -> f64 {
        self.clip_sigmas * self.pitch_sigma_cents
    }

    pub fn rate_limit(&self) -> f64 {
        self.clip_sigmas * self.rate_sigma_log2
    }
}

/// Seed of trial `index` in a session with `master_seed`.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    master_seed ^ index as u64
}

/// Master seed of participant `index` in a simulated group. Participants
/// differ above bit 32, so their trial seeds never coincide for sessions of
/// fewer than 2^32 trials.
pub fn participant_seed(group_seed: u64, index: usize) -> u64 {
    group_seed ^ ((index as u64) << 32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformProfile {
    #[serde(rename = "pitch_points")]
    pub pitch: Breakpoints,
    #[serde(rename = "stretch_points")]
    pub stretch: Breakpoints,
    pub seed: u64,
}

impl TransformProfile {
    pub fn pitch_values(&self) -> Vec<f64> {
        self.pitch.values().collect()
    }

    pub fn stretch_values(&self) -> Vec<f64> {
        self.stretch.values().collect()
    }

    pub fn dim(&self) -> usize {
        self.pitch.points().len()
    }
}

fn saturated_draws(rng: &mut ChaCha20Rng, n: usize, sigma: f64, clip_sigmas: f64) -> Vec<f64> {
    let limit = clip_sigmas * sigma;
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (z * sigma).clamp(-limit, limit)
        })
        .collect()
}

pub fn sample_profile(spec: &SamplingSpec) -> Result<TransformProfile> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let times = spec.breakpoint_times();
    let pitch = saturated_draws(&mut rng, spec.num_windows, spec.pitch_sigma_cents, spec.clip_sigmas);
    let stretch = saturated_draws(&mut rng, spec.num_windows, spec.rate_sigma_log2, spec.clip_sigmas);
    let zip = |v: Vec<f64>| Breakpoints::new(times.iter().copied().zip(v).collect());
    Ok(TransformProfile {
        pitch: zip(pitch)?,
        stretch: zip(stretch)?,
        seed: spec.seed,
    })
}

/// `(cents, log2_factor)` of `profile` at time `t` seconds.
pub fn interpolate(profile: &TransformProfile, t: f64) -> (f64, f64) {
    (profile.pitch.eval(t), profile.stretch.eval(t))
}

/// JSON document describing one trial's profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialProfileDoc {
    pub trial_index: usize,
    pub seed: u64,
    pub pitch_points: Vec<(f64, f64)>,
    pub stretch_points: Vec<(f64, f64)>,
}

impl TrialProfileDoc {
    pub fn new(trial_index: usize, profile: &TransformProfile) -> Self {
        TrialProfileDoc {
            trial_index,
            seed: profile.seed,
            pitch_points: profile.pitch.points().to_vec(),
            stretch_points: profile.stretch.points().to_vec(),
        }
    }

    pub fn to_profile(&self) -> Result<TransformProfile> {
        Ok(TransformProfile {
            pitch: Breakpoints::new(self.pitch_points.clone())?,
            stretch: Breakpoints::new(self.stretch_points.clone())?,
            seed: self.seed,
        })
    }
}

/// One row of the flat profile table: per-window values keyed by trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub session_id: String,
    pub trial_index: usize,
    pub seed: u64,
    pub pitch: Vec<f64>,
    pub stretch: Vec<f64>,
}

impl ProfileRow {
    pub fn new(session_id: &str, trial_index: usize, profile: &TransformProfile) -> Self {
        ProfileRow {
            session_id: session_id.to_string(),
            trial_index,
            seed: profile.seed,
            pitch: profile.pitch_values(),
            stretch: profile.stretch_values(),
        }
    }
}

/// Writes `session_id,trial_index,seed,pitch_0..pitch_{n-1},stretch_0..stretch_{n-1}`.
///
/// All rows must share one dimension.
pub fn write_profile_csv<W: Write>(writer: W, rows: &[ProfileRow]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.pitch.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["session_id".to_string(), "trial_index".into(), "seed".into()];
    header.extend((0..dim).map(|k| format!("pitch_{k}")));
    header.extend((0..dim).map(|k| format!("stretch_{k}")));
    w.write_record(&header)?;
    for row in rows {
        if row.pitch.len() != dim || row.stretch.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.pitch.len().max(row.stretch.len()),
            });
        }
        let mut rec = vec![
            row.session_id.clone(),
            row.trial_index.to_string(),
            row.seed.to_string(),
        ];
        rec.extend(row.pitch.iter().chain(&row.stretch).map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<profile csv>", e))?;
    Ok(())
}

pub fn read_profile_csv<R: Read>(reader: R) -> Result<Vec<ProfileRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let session = col("session_id");
    let trial = col("trial_index").ok_or_else(|| Error::Malformed("missing trial_index column".into()))?;
    let seed = col("seed");
    let pitch_cols: Vec<usize> = (0..).map_while(|k| col(&format!("pitch_{k}"))).collect();
    let stretch_cols: Vec<usize> = (0..).map_while(|k| col(&format!("stretch_{k}"))).collect();
    if pitch_cols.is_empty() || pitch_cols.len() != stretch_cols.len() {
        return Err(Error::Malformed(
            "profile table needs matching pitch_k and stretch_k columns".into(),
        ));
    }
    let num = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec[i]
            .parse()
            .map_err(|_| Error::Malformed(format!("bad number {:?}", &rec[i])))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(ProfileRow {
            session_id: session.map_or_else(String::new, |i| rec[i].to_string()),
            trial_index: rec[trial]
                .parse()
                .map_err(|_| Error::Malformed(format!("bad trial index {:?}", &rec[trial])))?,
            seed: match seed {
                Some(i) => rec[i]
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad seed {:?}", &rec[i])))?,
                None => 0,
            },
            pitch: pitch_cols.iter().map(|&i| num(&rec, i)).collect::<Result<_>>()?,
            stretch: stretch_cols.iter().map(|&i| num(&rec, i)).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}
