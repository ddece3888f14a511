use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::audio::{read_wav, write_wav, AudioBuffer, WavFormat};
use crate::dsp::{apply_profiles, StftConfig};
use crate::error::{Error, Result};
use crate::experiment::session::{OptionOrder, SessionManifest, StimulusSet, TrialPlan};
use crate::experiment::store::SessionDir;
use crate::profile::{
    sample_profile, trial_seed, write_profile_csv, ProfileRow, SamplingSpec, TransformProfile,
    TrialProfileDoc,
};

pub const DEFAULT_TRIALS: usize = 250;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub participant_id: String,
    /// Defaults to `<participant_id>-<stimulus id>`.
    pub session_id: Option<String>,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Sampling parameters; the seed field is replaced per trial.
    pub sampling: SamplingSpec,
    pub stft: StftConfig,
    pub wav_format: WavFormat,
}

impl BuildOptions {
    pub fn new(stimulus: &StimulusSet, participant_id: impl Into<String>, master_seed: u64) -> Self {
        BuildOptions {
            participant_id: participant_id.into(),
            session_id: None,
            n_trials: DEFAULT_TRIALS,
            master_seed,
            sampling: SamplingSpec::for_kind(stimulus.kind, master_seed),
            stft: StftConfig::default(),
            wav_format: WavFormat::Float32,
        }
    }

    pub fn session_id_for(&self, stimulus: &StimulusSet) -> String {
        self.session_id
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.participant_id, stimulus.id))
    }
}

/// Profiles of trials `0..n_trials`, trial `i` drawn with seed `master_seed ^ i`.
pub fn plan_profiles(sampling: &SamplingSpec, n_trials: usize, master_seed: u64) -> Result<Vec<TransformProfile>> {
    (0..n_trials)
        .map(|i| sample_profile(&sampling.with_seed(trial_seed(master_seed, i))))
        .collect()
}

/// Session-level draw, taken from stream 1 of the master seed so it never
/// overlaps a trial stream.
pub fn draw_option_order(master_seed: u64) -> OptionOrder {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(1);
    if rng.random::<bool>() {
        OptionOrder::BA
    } else {
        OptionOrder::AB
    }
}

pub fn build_session(stimulus: &StimulusSet, opts: &BuildOptions, out_dir: impl AsRef<Path>) -> Result<SessionDir> {
    let base = read_wav(&stimulus.base_audio)?;
    build_session_with_audio(stimulus, &base, opts, out_dir)
}

/// Samples every trial profile, renders all stimuli in parallel, and writes
/// the session directory. Any render failure aborts the build and names the
/// trial.
pub fn build_session_with_audio(
    stimulus: &StimulusSet,
    base: &AudioBuffer,
    opts: &BuildOptions,
    out_dir: impl AsRef<Path>,
) -> Result<SessionDir> {
    if opts.n_trials == 0 {
        return Err(Error::TooFew {
            what: "trials",
            needed: 1,
            got: 0,
        });
    }
    stimulus.validate(base.duration_s())?;
    opts.stft.validate()?;
    let out_dir = out_dir.as_ref();
    let session_id = opts.session_id_for(stimulus);
    let profiles = plan_profiles(&opts.sampling, opts.n_trials, opts.master_seed)?;

    for sub in ["audio", "profiles"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let trials: Vec<TrialPlan> = profiles
        .into_par_iter()
        .enumerate()
        .map(|(i, profile)| {
            let stimulus_path = format!("audio/trial_{i:04}.wav");
            let rendered = apply_profiles(base, &profile.pitch, &profile.stretch, &opts.stft)
                .map_err(|e| Error::Render {
                    trial: i,
                    source: Box::new(e),
                })?;
            write_wav(out_dir.join(&stimulus_path), &rendered.audio, opts.wav_format)?;
            let doc_path = out_dir.join(format!("profiles/trial_{i:04}.json"));
            let doc = serde_json::to_string_pretty(&TrialProfileDoc::new(i, &profile))?;
            fs::write(&doc_path, doc).map_err(|e| Error::io(&doc_path, e))?;
            Ok(TrialPlan {
                trial_index: i,
                seed: profile.seed,
                profile,
                stimulus_path,
                clipped_samples: rendered.clipped_samples,
            })
        })
        .collect::<Result<_>>()?;

    let rows: Vec<ProfileRow> = trials
        .iter()
        .map(|t| ProfileRow::new(&session_id, t.trial_index, &t.profile))
        .collect();
    let csv_path = out_dir.join("profiles.csv");
    let csv_file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_profile_csv(csv_file, &rows)?;

    let manifest = SessionManifest {
        session_id,
        participant_id: opts.participant_id.clone(),
        stimulus: stimulus.clone(),
        option_order: draw_option_order(opts.master_seed),
        n_trials: opts.n_trials,
        master_seed: opts.master_seed,
        sampling: opts.sampling.with_seed(opts.master_seed),
        stft: opts.stft,
        trials,
    };
    SessionDir::create(out_dir, manifest)
}
