use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod server;

#[derive(Parser)]
#[command(name = "revcorr", version, about = "Reverse-correlation listening experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GroupByArg {
    Participant,
    Session,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    Word,
    Phrase,
}

#[derive(Subcommand)]
enum Command {
    /// Sample profiles, render every trial and write a session directory.
    Build {
        /// Stimulus set JSON; `base_audio` is resolved relative to this file.
        #[arg(long)]
        stimulus: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = revcorr::experiment::DEFAULT_TRIALS)]
        n_trials: usize,
        #[arg(long)]
        participant: String,
        /// Defaults to `<participant>-<stimulus id>`.
        #[arg(long)]
        session_id: Option<String>,
        /// The session is written to `<out-dir>/<session id>`.
        #[arg(long)]
        out_dir: PathBuf,
        /// Write 16-bit PCM instead of 32-bit float WAV.
        #[arg(long)]
        pcm16: bool,
    },
    /// Serve every session under a directory over HTTP.
    Serve {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write the response table (and optionally the profile table) of every
    /// session under a directory.
    Export {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Answer trials with a simulated template observer.
    ///
    /// With `--session`, every unanswered trial of that session directory is
    /// answered and persisted. Otherwise a profile-level dataset of
    /// `--participants` × `--trials` is written to `--out` as profiles.csv and
    /// responses.csv, without rendering audio.
    Simulate {
        /// Observer JSON: {pitch_template, rate_template, noise_sd, bias}.
        #[arg(long)]
        observer: PathBuf,
        /// Replace noise_sd by the SD of the template response.
        #[arg(long)]
        matched_noise: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long, conflicts_with_all = ["participants", "trials", "out"])]
        session: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        participants: usize,
        #[arg(long, default_value_t = revcorr::experiment::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Word)]
        kind: KindArg,
        #[arg(long, default_value = "peel,pill")]
        labels: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kernels, per-segment statistics, bias and plots.
    Analyze {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_enum, default_value_t = GroupByArg::Participant)]
        group_by: GroupByArg,
        #[arg(long)]
        out: PathBuf,
        /// Option labels `A,B`; inferred (sorted) from the responses if absent.
        #[arg(long)]
        labels: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        window_s: f64,
        /// Bonferroni-correct across segments.
        #[arg(long)]
        bonferroni: bool,
    },
    /// Flatten the pitch contour of a recording to a constant frequency.
    Flatten {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = revcorr::dsp::FLAT_TARGET_HZ)]
        target_hz: f64,
    },
    /// Splice a target word into a carrier phrase after a silent gap.
    Insert {
        #[arg(long)]
        phrase: PathBuf,
        #[arg(long)]
        word: PathBuf,
        /// End of the carrier phrase, in seconds.
        #[arg(long)]
        marker_s: f64,
        #[arg(long, default_value_t = revcorr::dsp::DEFAULT_GAP_MS)]
        gap_ms: f64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Build {
            stimulus,
            seed,
            n_trials,
            participant,
            session_id,
            out_dir,
            pcm16,
        } => commands::build(&stimulus, seed, n_trials, participant, session_id, &out_dir, pcm16),
        Command::Serve { dir, port, host } => tokio::runtime::Runtime::new()?.block_on(server::serve(&dir, &host, port)),
        Command::Export { dir, out, profiles } => commands::export(&dir, &out, profiles.as_deref()),
        Command::Simulate {
            observer,
            matched_noise,
            seed,
            session,
            participants,
            trials,
            kind,
            labels,
            out,
        } => {
            let obs = commands::ObserverArgs {
                path: observer,
                matched_noise,
                seed,
            };
            match (session, out) {
                (Some(dir), _) => commands::simulate_session_dir(&obs, &dir),
                (None, Some(out)) => commands::simulate_dataset(&obs, participants, trials, kind, &labels, &out),
                (None, None) => anyhow::bail!("simulate needs either --session or --out"),
            }
        }
        Command::Analyze {
            profiles,
            responses,
            group_by,
            out,
            labels,
            window_s,
            bonferroni,
        } => commands::analyze(&profiles, &responses, group_by, &out, labels.as_deref(), window_s, bonferroni),
        Command::Flatten {
            input,
            output,
            target_hz,
        } => commands::flatten(&input, &output, target_hz),
        Command::Insert {
            phrase,
            word,
            marker_s,
            gap_ms,
            output,
        } => commands::insert(&phrase, &word, marker_s, gap_ms, &output),
    }
}
