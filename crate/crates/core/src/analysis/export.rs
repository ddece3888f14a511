//! Tables and plots of an analysis.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::dataset::AnalysisResult;
use crate::analysis::stats::GroupStats;
use crate::error::{Error, Result};
use crate::experiment::OptionLabels;

pub const STATS_FILE: &str = "stats.csv";
pub const KERNELS_FILE: &str = "kernels.csv";
pub const BIAS_FILE: &str = "bias.csv";
pub const PLOT_FILE: &str = "kernels.svg";

pub const STATS_CSV_HEADER: [&str; 10] = [
    "segment_time_s",
    "domain",
    "mean_A",
    "mean_B",
    "ci_A",
    "ci_B",
    "t",
    "df",
    "p",
    "significant",
];

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

fn finish<W: Write>(w: csv::Writer<W>, what: &str) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(what, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(what, e))
}

pub fn write_stats_csv<W: Write>(writer: W, stats: &[&GroupStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STATS_CSV_HEADER)?;
    for g in stats {
        for s in &g.segments {
            w.write_record([
                num(s.time_s),
                g.domain.as_str().to_string(),
                num(s.mean_a),
                num(s.mean_b),
                num(s.ci95_a),
                num(s.ci95_b),
                num(s.t),
                s.df.to_string(),
                num(s.p),
                s.significant.to_string(),
            ])?;
        }
    }
    finish(w, STATS_FILE)
}

/// Long-format individual kernels: participant, domain, option, segment, value.
pub fn write_kernels_csv<W: Write>(writer: W, result: &AnalysisResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["participant_id", "domain", "option", "segment_time_s", "value"])?;
    for p in &result.participants {
        for k in p.kernels(&result.labels) {
            for (t, v) in result.segment_times.iter().zip(&k.values) {
                w.write_record([
                    k.participant_id.as_str(),
                    k.domain.as_str(),
                    k.option.as_str(),
                    &num(*t),
                    &num(*v),
                ])?;
            }
        }
    }
    finish(w, KERNELS_FILE)
}

pub fn write_bias_csv<W: Write>(writer: W, result: &AnalysisResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["participant_id", "option", "count", "proportion", "n_trials"])?;
    let overall = ("all".to_string(), result.overall_bias.clone());
    for (id, b) in result.bias.iter().chain(std::iter::once(&overall)) {
        for k in 0..2 {
            w.write_record([
                id.as_str(),
                if k == 0 { b.labels.a() } else { b.labels.b() },
                &b.counts[k].to_string(),
                &num(b.proportions[k]),
                &b.n_trials.to_string(),
            ])?;
        }
    }
    finish(w, BIAS_FILE)
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 44.0;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn y_range(g: &GroupStats) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &g.segments {
        for (m, c) in [(s.mean_a, s.ci95_a), (s.mean_b, s.ci95_b)] {
            for v in [m - c, m + c] {
                if v.is_finite() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.15 * (hi - lo);
    (lo - pad, hi + pad)
}

fn panel(out: &mut String, g: &GroupStats, labels: &OptionLabels, x0: f64) {
    let times: Vec<f64> = g.segments.iter().map(|s| s.time_s).collect();
    let (t_min, t_max) = match (times.first(), times.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (*a - 0.05, *a + 0.05),
        _ => (0.0, 1.0),
    };
    let (y_lo, y_hi) = y_range(g);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |t: f64| x0 + MARGIN_L + (t - t_min) / (t_max - t_min) * plot_w;
    let py = |v: f64| MARGIN_T + (y_hi - v.clamp(y_lo, y_hi)) / (y_hi - y_lo) * plot_h;

    let _ = writeln!(out, "<g class=\"panel\" id=\"{}\">", g.domain.as_str());
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        x0 + MARGIN_L + plot_w / 2.0,
        g.domain.title()
    );
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444\"/>",
        x0 + MARGIN_L,
        MARGIN_T,
        plot_w,
        plot_h
    );
    if y_lo < 0.0 && y_hi > 0.0 {
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>",
            x0 + MARGIN_L,
            py(0.0),
            x0 + MARGIN_L + plot_w,
            py(0.0)
        );
    }
    for &t in &times {
        let x = px(t);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#444\"/>",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 4.0
        );
        let _ = writeln!(
            out,
            "<text class=\"xtick\" x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\">{t:.1}</text>",
            MARGIN_T + plot_h + 16.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">time (s)</text>",
        x0 + MARGIN_L + plot_w / 2.0,
        PANEL_H - 8.0
    );
    for v in [y_lo, (y_lo + y_hi) / 2.0, y_hi] {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"10\">{v:.2}</text>",
            x0 + MARGIN_L - 4.0,
            py(v) + 3.0
        );
    }
    for (k, color) in COLORS.iter().enumerate() {
        let pick = |s: &crate::analysis::stats::SegmentStats| {
            if k == 0 {
                (s.mean_a, s.ci95_a)
            } else {
                (s.mean_b, s.ci95_b)
            }
        };
        let upper: Vec<String> = g
            .segments
            .iter()
            .map(|s| {
                let (m, c) = pick(s);
                format!("{:.2},{:.2}", px(s.time_s), py(m + c))
            })
            .collect();
        let lower: Vec<String> = g
            .segments
            .iter()
            .rev()
            .map(|s| {
                let (m, c) = pick(s);
                format!("{:.2},{:.2}", px(s.time_s), py(m - c))
            })
            .collect();
        let _ = writeln!(
            out,
            "<polygon class=\"ci\" points=\"{} {}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>",
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = g
            .segments
            .iter()
            .map(|s| format!("{:.2},{:.2}", px(s.time_s), py(pick(s).0)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            line.join(" ")
        );
        let label = escape(if k == 0 { labels.a() } else { labels.b() });
        let lx = x0 + MARGIN_L + 8.0 + 90.0 * k as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{lx:.2}\" y1=\"32\" x2=\"{:.2}\" y2=\"32\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.2}\" y=\"35\" font-size=\"10\">{label}</text>",
            lx + 14.0,
            lx + 18.0
        );
    }
    for s in g.segments.iter().filter(|s| s.significant) {
        let _ = writeln!(
            out,
            "<text class=\"star\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"16\">*</text>",
            px(s.time_s),
            MARGIN_T + 14.0
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Pitch kernels on the left, rate kernels on the right.
pub fn render_svg(pitch: &GroupStats, rate: &GroupStats, labels: &OptionLabels) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">",
        w = 2.0 * PANEL_W,
        h = PANEL_H
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    panel(&mut out, pitch, labels, 0.0);
    panel(&mut out, rate, labels, PANEL_W);
    let _ = writeln!(out, "</svg>");
    out
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, fs::File)> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, file))
}

/// Writes the stats, kernel and bias tables and the plot into `out_dir`,
/// creating it if needed. Returns the written paths.
pub fn export_results(result: &AnalysisResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let (p, f) = create(out_dir, STATS_FILE)?;
    write_stats_csv(std::io::BufWriter::new(f), &[&result.pitch, &result.rate])?;
    written.push(p);
    let (p, f) = create(out_dir, KERNELS_FILE)?;
    write_kernels_csv(std::io::BufWriter::new(f), result)?;
    written.push(p);
    let (p, f) = create(out_dir, BIAS_FILE)?;
    write_bias_csv(std::io::BufWriter::new(f), result)?;
    written.push(p);
    let path = out_dir.join(PLOT_FILE);
    fs::write(&path, render_svg(&result.pitch, &result.rate, &result.labels)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
