mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use revcorr::audio::{read_wav, write_wav, WavFormat};
use revcorr::experiment::read_response_csv;
use revcorr::profile::read_profile_csv;

use common::voice;

fn revcorr(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_revcorr"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "revcorr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_observer(path: &Path) {
    let obs = serde_json::json!({
        "pitch_template": [1.0, 0.5, -0.5, -1.0],
        "rate_template": [100.0, 0.0, 0.0, -100.0],
        "noise_sd": 1.0,
    });
    fs::write(path, obs.to_string()).unwrap();
}

#[test]
fn build_simulate_export_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    write_wav(root.join("peel.wav"), &voice(0.45), WavFormat::Float32).unwrap();
    let stim = serde_json::json!({
        "id": "peel-pill",
        "base_audio": "peel.wav",
        "kind": "word",
        "option_labels": ["peel", "pill"],
    });
    fs::write(root.join("stim.json"), stim.to_string()).unwrap();
    write_observer(&root.join("obs.json"));

    for p in ["p01", "p02"] {
        revcorr(
            &["build", "--stimulus", "stim.json", "--seed", "5", "--n-trials", "12", "--participant", p, "--out-dir", "sessions"],
            root,
        );
    }
    let dir = root.join("sessions/p01-peel-pill");
    assert!(dir.join("manifest.json").is_file());
    assert_eq!(fs::read_dir(dir.join("audio")).unwrap().count(), 12);
    let wav = read_wav(dir.join("audio/trial_0000.wav")).unwrap();
    assert_eq!(wav.sample_rate(), common::SR);

    // building over an existing session is refused
    let again = Command::new(env!("CARGO_BIN_EXE_revcorr"))
        .args(["build", "--stimulus", "stim.json", "--seed", "6", "--n-trials", "3", "--participant", "p01", "--out-dir", "sessions"])
        .current_dir(root)
        .output()
        .unwrap();
    assert!(!again.status.success());

    for p in ["p01", "p02"] {
        let dir = format!("sessions/{p}-peel-pill");
        revcorr(&["simulate", "--observer", "obs.json", "--matched-noise", "--seed", "3", "--session", &dir], root);
    }
    revcorr(&["export", "--dir", "sessions", "--out", "responses.csv", "--profiles", "profiles.csv"], root);
    let responses = read_response_csv(fs::File::open(root.join("responses.csv")).unwrap()).unwrap();
    let profiles = read_profile_csv(fs::File::open(root.join("profiles.csv")).unwrap()).unwrap();
    assert_eq!(responses.len(), 24);
    assert_eq!(profiles.len(), 24);

    let out = revcorr(
        &["analyze", "--profiles", "profiles.csv", "--responses", "responses.csv", "--out", "results"],
        root,
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("2 participants, 24 trials"), "{text}");
    for f in ["stats.csv", "kernels.csv", "bias.csv", "kernels.svg"] {
        assert!(root.join("results").join(f).is_file(), "{f}");
    }
    let stats = fs::read_to_string(root.join("results/stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 8);
}

#[test]
fn simulated_dataset_recovers_the_template() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    write_observer(&root.join("obs.json"));
    revcorr(
        &["simulate", "--observer", "obs.json", "--matched-noise", "--seed", "8", "--participants", "25", "--trials", "250", "--out", "sim"],
        root,
    );
    let out = revcorr(
        &["analyze", "--profiles", "sim/profiles.csv", "--responses", "sim/responses.csv", "--out", "res", "--labels", "peel,pill"],
        root,
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("25 participants, 6250 trials"), "{text}");
    let stats = fs::read_to_string(root.join("res/stats.csv")).unwrap();
    let mut rows = stats.lines().skip(1).map(|l| l.split(',').collect::<Vec<_>>());
    // the outer pitch segments carry the largest weights
    let first = rows.next().unwrap();
    assert_eq!(first[1], "pitch");
    assert_eq!(first[9], "true");
    let svg = fs::read_to_string(root.join("res/kernels.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn flatten_and_insert_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    write_wav(root.join("word.wav"), &voice(0.4), WavFormat::Float32).unwrap();
    write_wav(root.join("phrase.wav"), &voice(1.0), WavFormat::Float32).unwrap();
    revcorr(&["flatten", "--input", "word.wav", "--output", "flat.wav"], root);
    let flat = read_wav(root.join("flat.wav")).unwrap();
    assert!(flat.len() > 0);
    let out = revcorr(
        &["insert", "--phrase", "phrase.wav", "--word", "flat.wav", "--marker-s", "1.0", "--output", "spliced.wav"],
        root,
    );
    assert!(String::from_utf8(out.stdout).unwrap().contains("target onset at"));
    let spliced = read_wav(root.join("spliced.wav")).unwrap();
    assert!(spliced.len() > flat.len());
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_revcorr"))
        .args(["export", "--dir", "nowhere", "--out", "x.csv"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).contains("panicked"));
    let out = Command::new(env!("CARGO_BIN_EXE_revcorr"))
        .args(["simulate", "--observer", "missing.json", "--seed", "1"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
