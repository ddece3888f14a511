//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with
//! `cargo test -p revcorr-cli --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use revcorr::analysis::{analyze_trials, bias, cosine_similarity, paired_t, template_direction, Correction, Domain, Trial};
use revcorr::audio::{write_wav, WavFormat};
use revcorr::dsp::{estimate_f0, flatten_pitch, pitch_shift, time_stretch, F0Range, StftConfig};
use revcorr::experiment::{plan_profiles, Choice, OptionLabels, SessionDir};
use revcorr::observer::LinearTemplateObserver;
use revcorr::profile::{participant_seed, SamplingSpec, StimulusKind};
use revcorr::{AudioBuffer, Breakpoints};

use common::{build_word_session, voice, Server};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("stimulus conformance", stimulus_conformance),
        ("sampling law", sampling_law),
        ("DSP frequency law", frequency_law),
        ("DSP duration law", duration_law),
        ("pitch flattening", pitch_flattening),
        ("kernel recovery", kernel_recovery),
        ("null safety", null_safety),
        ("statistics oracle", statistics_oracle),
        ("crash safety", crash_safety),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{secs:.1} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.1} s]: {detail}");
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn revcorr(args: &[&str], dir: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_revcorr"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("revcorr {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn check_layout(dir: &Path, n_trials: usize, n_points: usize) -> Result<(), String> {
    let s = SessionDir::open(dir).map_err(|e| e.to_string())?;
    let m = &s.session().manifest;
    ensure(m.n_trials == n_trials && m.trials.len() == n_trials, || {
        format!("{} trials in manifest", m.trials.len())
    })?;
    for t in &m.trials {
        for bpf in [&t.profile.pitch, &t.profile.stretch] {
            let pts = bpf.points();
            ensure(pts.len() == n_points, || format!("trial {}: {} breakpoints", t.trial_index, pts.len()))?;
            for w in pts.windows(2) {
                ensure((w[1].0 - w[0].0 - 0.1).abs() < 1e-9, || {
                    format!("trial {}: spacing {}", t.trial_index, w[1].0 - w[0].0)
                })?;
            }
        }
        ensure(s.dir().join(&t.stimulus_path).is_file(), || format!("missing audio for trial {}", t.trial_index))?;
    }
    Ok(())
}

fn stimulus_conformance() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    write_wav(root.join("word.wav"), &voice(0.45), WavFormat::Float32).unwrap();
    write_wav(root.join("phrase.wav"), &voice(1.4), WavFormat::Float32).unwrap();
    for (id, wav, kind) in [("word", "word.wav", "word"), ("phrase", "phrase.wav", "phrase")] {
        let stim = json!({ "id": id, "base_audio": wav, "kind": kind, "option_labels": ["peel", "pill"] });
        fs::write(root.join(format!("{id}.json")), stim.to_string()).unwrap();
    }
    let start = Instant::now();
    revcorr(&["build", "--stimulus", "word.json", "--seed", "1", "--participant", "p01", "--out-dir", "s"], root)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("word session took {secs:.1} s"))?;
    check_layout(&root.join("s/p01-word"), 250, 4)?;
    revcorr(
        &["build", "--stimulus", "phrase.json", "--seed", "2", "--n-trials", "5", "--participant", "p01", "--out-dir", "s"],
        root,
    )?;
    check_layout(&root.join("s/p01-phrase"), 5, 13)?;
    Ok(format!("250 word trials x 4+4 breakpoints at 0.1 s rendered in {secs:.1} s; phrase trials carry 13"))
}

/// Standard normal pdf and SD of N(0, σ²) clamped at ±2σ, by Simpson's rule.
fn saturated_sd_oracle(sigma: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let n = 20_000;
    let h = 4.0 / n as f64;
    let (mut mass, mut second) = (0.0, 0.0);
    for i in 0..=n {
        let z = -2.0 + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        mass += w * phi(z);
        second += w * z * z * phi(z);
    }
    let (mass, second) = (mass * h / 3.0, second * h / 3.0);
    sigma * (second + 4.0 * (1.0 - mass)).sqrt()
}

fn sampling_law() -> Outcome {
    let spec = SamplingSpec::for_kind(StimulusKind::Word, 0);
    let (mut pitch, mut stretch) = (Vec::new(), Vec::new());
    for p in plan_profiles(&spec, 25_000, 0x5EED).map_err(|e| e.to_string())? {
        pitch.extend(p.pitch_values());
        stretch.extend(p.stretch_values());
    }
    ensure(pitch.len() == 100_000, || format!("{} draws", pitch.len()))?;
    let n = pitch.len() as f64;
    let mean = pitch.iter().sum::<f64>() / n;
    let sd = (pitch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let max = pitch.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let expected_sd = saturated_sd_oracle(100.0);
    ensure(mean.abs() <= 1.0, || format!("pitch mean {mean:.3} cents"))?;
    ensure(max == 200.0, || format!("pitch max magnitude {max}"))?;
    ensure((85.0..=100.0).contains(&sd), || format!("pitch sd {sd:.2}"))?;
    ensure((sd - expected_sd).abs() < 1.0, || format!("pitch sd {sd:.2} vs oracle {expected_sd:.2}"))?;
    let hi = stretch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = stretch.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(hi == 1.0 && lo == -1.0, || format!("stretch range [{lo}, {hi}]"))?;
    Ok(format!(
        "1e5 pitch draws: mean {mean:.3}, sd {sd:.2} (oracle {expected_sd:.2}), max |x| {max}; stretch in [{lo}, {hi}]"
    ))
}

const SR: u32 = 44100;

/// Magnitude of the Hann-windowed DTFT of `x` at `freq`.
fn dtft_mag(x: &[f64], freq: f64) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos();
        let ph = 2.0 * PI * freq * i as f64 / SR as f64;
        re += v * w * ph.cos();
        im -= v * w * ph.sin();
    }
    (re * re + im * im).sqrt()
}

/// Spectral peak: 1 Hz scan over [lo, hi], then 0.01 Hz refinement.
fn peak_frequency(x: &[f64], lo: f64, hi: f64) -> f64 {
    let argmax = |freqs: &mut dyn Iterator<Item = f64>| {
        freqs
            .map(|f| (f, dtft_mag(x, f)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    };
    let coarse = argmax(&mut (0..=((hi - lo) as usize)).map(|i| lo + i as f64));
    argmax(&mut (0..=200).map(|i| coarse - 1.0 + i as f64 * 0.01))
}

fn cents(a: f64, b: f64) -> f64 {
    1200.0 * (a / b).log2()
}

fn interior(x: &AudioBuffer) -> &[f64] {
    let s = x.samples();
    &s[s.len() / 10..s.len() * 9 / 10]
}

fn frequency_law() -> Outcome {
    let cfg = StftConfig::default();
    let mut worst: f64 = 0.0;
    for f in [110.0, 220.0, 440.0] {
        let tone = AudioBuffer::from_fn(SR as usize, SR, |t| 0.5 * (2.0 * PI * f * t).sin());
        for c in [-200.0, -100.0, 100.0, 200.0] {
            let out = pitch_shift(&tone, &Breakpoints::constant(c), &cfg).map_err(|e| e.to_string())?;
            let expected = f * 2f64.powf(c / 1200.0);
            let got = peak_frequency(interior(&out), expected * 0.8, expected * 1.2);
            let err = cents(got, expected);
            ensure(err.abs() <= 5.0, || format!("{f} Hz shifted {c} cents: {got:.3} Hz ({err:.2} cents off)"))?;
            worst = worst.max(err.abs());
        }
    }
    Ok(format!("12 tone/shift pairs, worst error {worst:.3} cents (limit 5)"))
}

fn duration_law() -> Outcome {
    let cfg = StftConfig::default();
    let input = AudioBuffer::from_fn(SR as usize, SR, |t| {
        (1..=8).map(|h| 0.12 / h as f64 * (2.0 * PI * 150.0 * h as f64 * t).sin()).sum()
    });
    let mut report = Vec::new();
    for (s, factor) in [(1.0, 2.0), (-1.0, 0.5)] {
        let out = time_stretch(&input, &Breakpoints::constant(s), &cfg).map_err(|e| e.to_string())?;
        let expected = input.len() as f64 * factor;
        let err = out.len() as f64 - expected;
        ensure(err.abs() <= cfg.hop as f64, || format!("stretch {s}: {} samples, expected {expected}", out.len()))?;
        report.push(format!("x{factor}: {} vs {expected} samples", out.len()));
    }
    Ok(format!("{} (tolerance {} samples)", report.join(", "), cfg.hop))
}

fn pitch_flattening() -> Outcome {
    let cfg = StftConfig::default();
    let glide = AudioBuffer::from_fn(SR as usize, SR, |t| {
        // linear sweep from 100 to 180 Hz over one second
        0.5 * (2.0 * PI * (100.0 * t + 40.0 * t * t)).sin()
    });
    let out = flatten_pitch(&glide, 120.0, &cfg).map_err(|e| e.to_string())?;
    let track = estimate_f0(&out, 0.01, F0Range::default()).map_err(|e| e.to_string())?;
    let devs: Vec<f64> = track.voiced().map(|(_, f)| cents(f, 120.0)).collect();
    ensure(!devs.is_empty(), || "no voiced frames".into())?;
    let frac = devs.iter().filter(|d| d.abs() <= 25.0).count() as f64 / devs.len() as f64;
    ensure(frac >= 0.9, || format!("{:.1}% of voiced frames within 25 cents", 100.0 * frac))?;
    // spectral peaks of 2048-sample frames, independent of the f0 tracker
    let x = interior(&out);
    let frames: Vec<&[f64]> = x.windows(2048).step_by(1024).collect();
    let near = frames
        .iter()
        .filter(|fr| cents(peak_frequency(fr, 90.0, 160.0), 120.0).abs() <= 25.0)
        .count() as f64
        / frames.len() as f64;
    ensure(near >= 0.9, || format!("{:.1}% of frames peak within 25 cents", 100.0 * near))?;
    Ok(format!(
        "{:.1}% of {} voiced frames within 25 cents of 120 Hz; {:.1}% of spectral frames",
        100.0 * frac,
        devs.len(),
        100.0 * near
    ))
}

/// 1st percentile of the independent brute-force oracle cosine over 200
/// replicate groups (25 × 250, ramp template), rounded down.
const FROZEN_THRESHOLD_250: f64 = 0.98;
const WORD_PITCH: [f64; 4] = [1.0, 0.5, -0.5, -1.0];
const WORD_RATE: [f64; 4] = [100.0, 0.0, 0.0, -100.0];

fn simulated_cosine(n_part: usize, n_trials: usize, seed: u64) -> Result<f64, String> {
    let spec = SamplingSpec::for_kind(StimulusKind::Word, 0);
    let obs = LinearTemplateObserver::matched_noise(WORD_PITCH.to_vec(), WORD_RATE.to_vec(), &spec)
        .map_err(|e| e.to_string())?;
    let labels = OptionLabels::new("peel", "pill").unwrap();
    let groups: Vec<(String, Vec<Trial>)> = (0..n_part)
        .map(|p| {
            let master = participant_seed(seed, p);
            let mut rng = ChaCha20Rng::seed_from_u64(!master);
            let trials = plan_profiles(&spec, n_trials, master)
                .unwrap()
                .iter()
                .map(|pr| Trial {
                    pitch: pr.pitch_values(),
                    stretch: pr.stretch_values(),
                    choice: obs.decide(pr, &mut rng).unwrap(),
                })
                .collect();
            (format!("sim{p:03}"), trials)
        })
        .collect();
    let res = analyze_trials(&groups, &labels, 0.1, Correction::None).map_err(|e| e.to_string())?;
    Ok(cosine_similarity(&res.group_difference, &template_direction(&WORD_PITCH, &WORD_RATE)))
}

fn kernel_recovery() -> Outcome {
    let start = Instant::now();
    let c250 = simulated_cosine(25, 250, 2025)?;
    let c2000 = simulated_cosine(25, 2000, 2026)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(c250 >= 0.7, || format!("cosine {c250:.4} at 25x250"))?;
    ensure(c250 >= FROZEN_THRESHOLD_250, || {
        format!("cosine {c250:.4} at 25x250, threshold {FROZEN_THRESHOLD_250}")
    })?;
    ensure(c2000 >= 0.9, || format!("cosine {c2000:.4} at 25x2000"))?;
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "cosine {c250:.4} at 25x250 (frozen threshold {FROZEN_THRESHOLD_250}), {c2000:.4} at 25x2000, {secs:.1} s"
    ))
}

fn null_safety() -> Outcome {
    let spec = SamplingSpec::for_kind(StimulusKind::Word, 0);
    let labels = OptionLabels::new("peel", "pill").unwrap();
    let (mut flagged, mut total) = (0, 0);
    for run in 0..20u64 {
        let groups: Vec<(String, Vec<Trial>)> = (0..25)
            .map(|p| {
                let master = participant_seed(500 + run, p);
                let mut rng = ChaCha20Rng::seed_from_u64(!master);
                let trials = plan_profiles(&spec, 250, master)
                    .unwrap()
                    .into_iter()
                    .map(|pr| Trial {
                        pitch: pr.pitch_values(),
                        stretch: pr.stretch_values(),
                        choice: if rng.random_bool(0.5) { Choice::A } else { Choice::B },
                    })
                    .collect();
                (p.to_string(), trials)
            })
            .collect();
        let res = analyze_trials(&groups, &labels, 0.1, Correction::None).map_err(|e| e.to_string())?;
        for d in Domain::ALL {
            flagged += res.stats(d).significant_count();
            total += res.stats(d).segments.len();
        }
    }
    let seg_rate = flagged as f64 / total as f64;
    ensure(seg_rate <= 0.10, || format!("{flagged} of {total} segments flagged"))?;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let n_tests = 10_000;
    let hits = (0..n_tests)
        .filter(|_| {
            let a: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
            paired_t(&a, &b).unwrap().p < 0.05
        })
        .count();
    let fpr = hits as f64 / n_tests as f64;
    ensure((0.03..=0.07).contains(&fpr), || format!("false-positive rate {fpr}"))?;
    Ok(format!(
        "{flagged} of {total} null segments flagged ({:.1}%); paired-t FPR {fpr:.4} over 1e4 tests",
        100.0 * seg_rate
    ))
}

/// Two-sided Student t p-value for integer `df` from the finite
/// trigonometric series for the t CDF.
fn p_series(t: f64, df: usize) -> f64 {
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    let df = df as i64;
    let series = |k0: i64| {
        let (mut term, mut sum, mut k) = (1.0, 1.0, k0);
        while k <= df - 3 {
            term *= k as f64 / (k + 1) as f64 * c2;
            sum += term;
            k += 2;
        }
        sum
    };
    let a = if df % 2 == 1 {
        let inner = if df > 1 { s * c * series(2) } else { 0.0 };
        2.0 / PI * (theta + inner)
    } else {
        s * series(1)
    };
    1.0 - a
}

fn statistics_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=40);
        let shift = rng.random_range(-1.0..1.0);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + shift + rng.random_range(-2.0..2.0)).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let m = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let t = m / (sd / (n as f64).sqrt());
        let r = paired_t(&a, &b).map_err(|e| e.to_string())?;
        let p = p_series(t, n - 1);
        ensure(r.df == n - 1, || format!("df {} for n {n}", r.df))?;
        ensure((r.t - t).abs() <= 1e-9 * t.abs().max(1.0), || format!("t {} vs {t}", r.t))?;
        ensure((r.p - p).abs() <= 1e-9, || format!("p {} vs {p} (n {n})", r.p))?;
        worst = worst.max((r.p - p).abs());
    }
    let labels = OptionLabels::new("peel", "pill").unwrap();
    let choices: Vec<Choice> = (0..250).map(|i| if i % 25 < 13 { Choice::A } else { Choice::B }).collect();
    let report = bias(choices, &labels);
    ensure(report.counts == [130, 120], || format!("counts {:?}", report.counts))?;
    ensure(report.proportions == [0.52, 0.48], || format!("proportions {:?}", report.proportions))?;
    Ok(format!(
        "100 datasets, max |p - oracle| {worst:.1e}; bias 130/250 -> {}",
        report.proportions[0]
    ))
}

const SCRIPT: [&str; 2] = ["peel", "pill"];

fn choice_for(i: usize) -> &'static str {
    SCRIPT[(i * 7 + i / 3) % 2]
}

/// Choices in the on-disk log, read without the server.
fn logged_choices(dir: &Path) -> Vec<String> {
    SessionDir::open(dir)
        .unwrap()
        .session()
        .responses
        .iter()
        .map(|r| r.choice.clone())
        .collect()
}

fn post_status(srv: &Server, id: &str, i: usize) -> u16 {
    srv.post(
        &format!("/api/sessions/{id}/response"),
        json!({"trial_index": i, "choice": choice_for(i), "rt_ms": 300.0}),
    )
    .0
}

fn crash_safety() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let id = build_word_session(root, "p01", 150, 77);
    let dir = root.join(&id);

    // kill after a known number of acknowledged responses
    let srv = Server::start(root);
    for i in 0..17 {
        ensure(post_status(&srv, &id, i) == 200, || format!("post {i} rejected"))?;
    }
    srv.kill();
    let srv = Server::start(root);
    let (_, st) = srv.get(&format!("/api/sessions/{id}/status"));
    ensure(st["answered"] == 17, || format!("after restart: {st}"))?;
    let (_, t) = srv.get(&format!("/api/sessions/{id}/trial"));
    ensure(t["trial_index"] == 17, || format!("next trial {t}"))?;

    // kill while a client posts as fast as it can
    let acked = Arc::new(AtomicUsize::new(17));
    let poster = {
        let acked = acked.clone();
        let (agent, url) = (srv.agent.clone(), format!("{}/api/sessions/{id}/response", srv.base));
        std::thread::spawn(move || {
            for i in 17..150 {
                let body = json!({"trial_index": i, "choice": choice_for(i), "rt_ms": 300.0});
                match agent.post(&url).send_json(body) {
                    Ok(r) if r.status() == 200 => acked.store(i + 1, Ordering::SeqCst),
                    _ => return,
                }
            }
        })
    };
    let deadline = Instant::now() + Duration::from_secs(30);
    while acked.load(Ordering::SeqCst) < 60 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    srv.kill();
    poster.join().unwrap();
    let acked = acked.load(Ordering::SeqCst);
    ensure(acked < 150, || "session finished before the kill".into())?;

    let log = logged_choices(&dir);
    ensure(log.len() >= acked && log.len() <= acked + 1, || {
        format!("{} responses on disk, {acked} acknowledged", log.len())
    })?;
    for (i, c) in log.iter().enumerate() {
        ensure(c == choice_for(i), || format!("trial {i}: logged {c}, sent {}", choice_for(i)))?;
    }
    let srv = Server::start(root);
    let (_, st) = srv.get(&format!("/api/sessions/{id}/status"));
    ensure(st["answered"] == log.len(), || format!("server reports {st}, log holds {}", log.len()))?;
    ensure(post_status(&srv, &id, log.len()) == 200, || "session did not resume".into())?;
    Ok(format!(
        "17 of 17 acknowledged responses survived SIGKILL; under load {acked} acknowledged, {} recovered, session resumed",
        log.len()
    ))
}
