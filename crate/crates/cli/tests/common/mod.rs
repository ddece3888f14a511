#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

use revcorr::audio::{write_wav, WavFormat};
use revcorr::experiment::{build_session_with_audio, BuildOptions, OptionLabels, StimulusSet};
use revcorr::profile::StimulusKind;
use revcorr::AudioBuffer;

pub const SR: u32 = 22050;

/// A harmonic complex with a smooth onset and offset, standing in for a
/// recorded word.
pub fn voice(secs: f64) -> AudioBuffer {
    AudioBuffer::from_fn((secs * SR as f64) as usize, SR, |t| {
        let env = (PI * t / secs).sin().powf(0.3);
        env * (1..=6)
            .map(|h| 0.15 / h as f64 * (2.0 * PI * 130.0 * h as f64 * t).sin())
            .sum::<f64>()
    })
}

pub fn word_stimulus(dir: &Path) -> (StimulusSet, AudioBuffer) {
    let base = voice(0.45);
    let path = dir.join("base.wav");
    write_wav(&path, &base, WavFormat::Float32).unwrap();
    let set = StimulusSet {
        id: "peel-pill".into(),
        base_audio: path,
        kind: StimulusKind::Word,
        option_labels: OptionLabels::new("peel", "pill").unwrap(),
        target_onset_s: 0.0,
    };
    (set, base)
}

/// Builds a word session under `root/<session id>` and returns its id.
pub fn build_word_session(root: &Path, participant: &str, n_trials: usize, seed: u64) -> String {
    let (set, base) = word_stimulus(root);
    let opts = BuildOptions {
        n_trials,
        ..BuildOptions::new(&set, participant, seed)
    };
    let id = opts.session_id_for(&set);
    build_session_with_audio(&set, &base, &opts, root.join(&id)).unwrap();
    id
}

/// A `revcorr serve` child process on an ephemeral port.
pub struct Server {
    pub child: Child,
    pub base: String,
    pub agent: Agent,
}

impl Server {
    pub fn start(root: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_revcorr"))
            .args(["serve", "--port", "0", "--dir"])
            .arg(root)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn revcorr serve");
        let mut line = String::new();
        let mut out = BufReader::new(child.stdout.take().unwrap());
        out.read_line(&mut line).unwrap();
        std::thread::spawn(move || std::io::copy(&mut out, &mut std::io::sink()));
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected server banner {line:?}"))
            .to_string();
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Server { child, base, agent }
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn get_bytes(&self, path: &str) -> (u16, Vec<u8>) {
        let mut r = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_to_vec().unwrap())
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = self
            .agent
            .post(&format!("{}{path}", self.base))
            .send_json(body)
            .unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap_or(Value::Null))
    }

    /// SIGKILL, as in a crash: no shutdown handlers run.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn session_dir(root: &Path, id: &str) -> PathBuf {
    root.join(id)
}
