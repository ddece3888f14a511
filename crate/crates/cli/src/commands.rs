use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use revcorr::analysis::{analyze as run_analysis, export_results, AnalysisOptions, Correction, Domain, GroupBy};
use revcorr::audio::{read_wav, write_wav, WavFormat};
use revcorr::dsp::{flatten_pitch, insert_target, StftConfig};
use revcorr::experiment::{
    build_session, discover_sessions, export_responses, plan_profiles, read_response_csv,
    write_response_csv, BuildOptions, OptionLabels, ResponseRow, Session, SessionDir, StimulusSet,
};
use revcorr::observer::{simulate_session, LinearTemplateObserver};
use revcorr::profile::{
    participant_seed, read_profile_csv, write_profile_csv, ProfileRow, SamplingSpec, StimulusKind,
};

use crate::{GroupByArg, KindArg};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_labels(s: &str) -> Result<OptionLabels> {
    match s.split_once(',') {
        Some((a, b)) => Ok(OptionLabels::new(a.trim(), b.trim())?),
        None => bail!("labels must be given as A,B, got {s:?}"),
    }
}

pub fn build(
    stimulus_path: &Path,
    seed: u64,
    n_trials: usize,
    participant: String,
    session_id: Option<String>,
    out_root: &Path,
    pcm16: bool,
) -> Result<()> {
    let mut stimulus: StimulusSet = read_json(stimulus_path)?;
    if stimulus.base_audio.is_relative() {
        let base_dir = stimulus_path.parent().unwrap_or(Path::new("."));
        stimulus.base_audio = base_dir.join(&stimulus.base_audio);
    }
    let mut opts = BuildOptions::new(&stimulus, participant, seed);
    opts.n_trials = n_trials;
    opts.session_id = session_id;
    if pcm16 {
        opts.wav_format = WavFormat::Pcm16;
    }
    let out = out_root.join(opts.session_id_for(&stimulus));
    if out.join(revcorr::experiment::MANIFEST_FILE).exists() {
        bail!("{} already holds a session", out.display());
    }
    let start = Instant::now();
    let dir = build_session(&stimulus, &opts, &out)?;
    let m = &dir.session().manifest;
    let clipped: usize = m.trials.iter().map(|t| t.clipped_samples).sum();
    println!(
        "built session {} ({} trials, option order {}) in {:.1} s at {}",
        m.session_id,
        m.n_trials,
        m.option_order.as_str(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    if clipped > 0 {
        println!("warning: {clipped} samples clipped across all trials");
    }
    Ok(())
}

fn open_sessions(root: &Path) -> Result<Vec<Session>> {
    let dirs = discover_sessions(root)?;
    if dirs.is_empty() {
        bail!("no sessions found under {}", root.display());
    }
    dirs.iter()
        .map(|d| Ok(SessionDir::open(d)?.session().clone()))
        .collect()
}

pub fn export(root: &Path, out: &Path, profiles: Option<&Path>) -> Result<()> {
    let sessions = open_sessions(root)?;
    let f = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    export_responses(&sessions, BufWriter::new(f))?;
    let n: usize = sessions.iter().map(|s| s.answered()).sum();
    println!("wrote {n} responses from {} sessions to {}", sessions.len(), out.display());
    if let Some(path) = profiles {
        let mut rows: Vec<ProfileRow> = Vec::new();
        let mut sorted: Vec<&Session> = sessions.iter().collect();
        sorted.sort_by(|a, b| a.id().cmp(b.id()));
        for s in sorted {
            rows.extend(
                s.manifest
                    .trials
                    .iter()
                    .map(|t| ProfileRow::new(s.id(), t.trial_index, &t.profile)),
            );
        }
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_profile_csv(BufWriter::new(f), &rows)?;
        println!("wrote {} profiles to {}", rows.len(), path.display());
    }
    Ok(())
}

pub struct ObserverArgs {
    pub path: PathBuf,
    pub matched_noise: bool,
    pub seed: u64,
}

impl ObserverArgs {
    fn load(&self, spec: &SamplingSpec) -> Result<LinearTemplateObserver> {
        let obs: LinearTemplateObserver = read_json(&self.path)?;
        obs.validate()?;
        if obs.dim() != spec.num_windows {
            bail!(
                "observer has {} segments per domain but the task has {}",
                obs.dim(),
                spec.num_windows
            );
        }
        Ok(if self.matched_noise {
            LinearTemplateObserver::matched_noise(obs.pitch_template, obs.rate_template, spec)?
        } else {
            obs
        })
    }
}

pub fn simulate_session_dir(args: &ObserverArgs, dir: &Path) -> Result<()> {
    let mut session = SessionDir::open(dir)?;
    let spec = session.session().manifest.sampling;
    let obs = args.load(&spec)?;
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let start = session.session().answered();
    let pending: Vec<_> = session.session().manifest.trials[start..]
        .iter()
        .map(|t| t.profile.clone())
        .collect();
    let labels = session.session().labels().clone();
    for (k, profile) in pending.iter().enumerate() {
        let choice = obs.decide(profile, &mut rng)?;
        session.record_response_at(start + k, labels.get(choice), 0.0, Utc::now())?;
    }
    println!(
        "answered {} trials of {} ({} / {})",
        pending.len(),
        session.session().id(),
        session.session().answered(),
        session.session().n_trials()
    );
    Ok(())
}

pub fn simulate_dataset(
    args: &ObserverArgs,
    participants: usize,
    trials: usize,
    kind: KindArg,
    labels: &str,
    out: &Path,
) -> Result<()> {
    let kind = match kind {
        KindArg::Word => StimulusKind::Word,
        KindArg::Phrase => StimulusKind::Phrase,
    };
    let labels = parse_labels(labels)?;
    let spec = SamplingSpec::for_kind(kind, args.seed);
    let obs = args.load(&spec)?;
    let mut profile_rows = Vec::new();
    let mut response_rows = Vec::new();
    for p in 0..participants {
        let master = participant_seed(args.seed, p);
        let participant_id = format!("sim{p:03}");
        let session_id = format!("{participant_id}-sim");
        let profiles = plan_profiles(&spec, trials, master)?;
        let mut rng = ChaCha20Rng::seed_from_u64(!master);
        let records = simulate_session(&obs, &profiles, &labels, DateTime::UNIX_EPOCH, &mut rng)?;
        profile_rows.extend(
            profiles
                .iter()
                .enumerate()
                .map(|(i, pr)| ProfileRow::new(&session_id, i, pr)),
        );
        response_rows.extend(records.iter().map(|r| ResponseRow {
            session_id: session_id.clone(),
            participant_id: participant_id.clone(),
            stimulus_id: "sim".into(),
            option_order: "AB".into(),
            trial_index: r.trial_index,
            choice: r.choice.clone(),
            rt_ms: r.rt_ms,
            timestamp: r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }));
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pf = out.join("profiles.csv");
    write_profile_csv(BufWriter::new(File::create(&pf)?), &profile_rows)?;
    let rf = out.join("responses.csv");
    write_response_csv(BufWriter::new(File::create(&rf)?), &response_rows)?;
    println!(
        "simulated {participants} participants x {trials} trials into {} and {}",
        pf.display(),
        rf.display()
    );
    Ok(())
}

pub fn analyze(
    profiles: &Path,
    responses: &Path,
    group_by: GroupByArg,
    out: &Path,
    labels: Option<&str>,
    window_s: f64,
    bonferroni: bool,
) -> Result<()> {
    let start = Instant::now();
    let profile_rows = read_profile_csv(File::open(profiles).with_context(|| format!("opening {}", profiles.display()))?)?;
    let response_rows =
        read_response_csv(File::open(responses).with_context(|| format!("opening {}", responses.display()))?)?;
    let opts = AnalysisOptions {
        group_by: match group_by {
            GroupByArg::Participant => GroupBy::Participant,
            GroupByArg::Session => GroupBy::Session,
        },
        labels: labels.map(parse_labels).transpose()?,
        window_duration_s: window_s,
        correction: if bonferroni { Correction::Bonferroni } else { Correction::None },
    };
    let result = run_analysis(&profile_rows, &response_rows, &opts)?;
    let written = export_results(&result, out)?;
    let b = &result.overall_bias;
    println!(
        "{} participants, {} trials; {} {:.1}% / {} {:.1}%",
        result.participants.len(),
        b.n_trials,
        b.labels.a(),
        100.0 * b.proportions[0],
        b.labels.b(),
        100.0 * b.proportions[1]
    );
    for d in Domain::ALL {
        let g = result.stats(d);
        let sig: Vec<String> = g
            .segments
            .iter()
            .filter(|s| s.significant)
            .map(|s| format!("{:.1}s (t({})={:.2}, p={:.3})", s.time_s, s.df, s.t, s.p))
            .collect();
        println!(
            "{}: {} of {} segments significant{}{}",
            d.as_str(),
            sig.len(),
            g.segments.len(),
            if sig.is_empty() { "" } else { ": " },
            sig.join(", ")
        );
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    println!("analysis took {:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn flatten(input: &Path, output: &Path, target_hz: f64) -> Result<()> {
    let audio = read_wav(input)?;
    let flat = flatten_pitch(&audio, target_hz, &StftConfig::default())?;
    write_wav(output, &flat, WavFormat::Float32)?;
    println!("flattened {} to {target_hz} Hz into {}", input.display(), output.display());
    Ok(())
}

pub fn insert(phrase: &Path, word: &Path, marker_s: f64, gap_ms: f64, output: &Path) -> Result<()> {
    let phrase = read_wav(phrase)?;
    let word = read_wav(word)?;
    if !(marker_s >= 0.0) {
        bail!("marker must be non-negative, got {marker_s}");
    }
    let marker = (marker_s * phrase.sample_rate() as f64).round() as usize;
    let spliced = insert_target(&phrase, &word, marker, gap_ms)?;
    write_wav(output, &spliced.audio, WavFormat::Float32)?;
    println!(
        "target onset at {:.4} s; use this as target_onset_s in the stimulus set",
        spliced.onset_s()
    );
    Ok(())
}
