//! Paired t-tests and cross-participant kernel statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::analysis::kernel::{Domain, ParticipantKernels};
use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    /// All differences identical and non-zero: `t` is `±inf` and `p` is 0.
    pub degenerate_variance: bool,
}

/// Two-sided p-value of a Student t statistic, `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Critical value `t` with `P(T <= t) = q` for `df` degrees of freedom.
pub fn t_quantile(q: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df > 0")
        .inverse_cdf(q)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sided paired t-test of `a` against `b` with `df = n - 1`.
///
/// Zero-variance differences follow a fixed convention instead of producing
/// NaN: all-zero differences give `t = 0, p = 1`; identical non-zero
/// differences give `t = ±inf, p = 0` flagged as degenerate.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<PairedT> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFew {
            what: "pairs",
            needed: 2,
            got: a.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let df = n - 1;
    let (mean, sd) = mean_sd(&d);
    if sd <= 1e-12 * mean.abs() || sd == 0.0 {
        return Ok(if mean == 0.0 {
            PairedT {
                t: 0.0,
                df,
                p: 1.0,
                degenerate_variance: false,
            }
        } else {
            PairedT {
                t: f64::INFINITY.copysign(mean),
                df,
                p: 0.0,
                degenerate_variance: true,
            }
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    Ok(PairedT {
        t,
        df,
        p: t_two_sided_p(t, df as f64),
        degenerate_variance: false,
    })
}

/// Optional family-wise correction across segments (off by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub time_s: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Half-widths of the two-sided 95% confidence intervals.
    pub ci95_a: f64,
    pub ci95_b: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
    pub degenerate_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub domain: Domain,
    pub n_participants: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub segments: Vec<SegmentStats>,
}

impl GroupStats {
    pub fn significant_count(&self) -> usize {
        self.segments.iter().filter(|s| s.significant).count()
    }
}

/// Per-segment means, 95% CIs and paired A-versus-B t-tests across
/// participants for one domain.
pub fn group_stats(
    participants: &[ParticipantKernels],
    domain: Domain,
    segment_times: &[f64],
    correction: Correction,
) -> Result<GroupStats> {
    let n = participants.len();
    if n < 2 {
        return Err(Error::TooFew {
            what: "participants",
            needed: 2,
            got: n,
        });
    }
    let dim = segment_times.len();
    for p in participants {
        let pair = p.domain(domain);
        for got in [pair.a.len(), pair.b.len()] {
            if got != dim {
                return Err(Error::DimensionMismatch { expected: dim, got });
            }
        }
    }
    let df = (n - 1) as f64;
    let t_crit = t_quantile(0.975, df);
    let alpha_eff = match correction {
        Correction::None => ALPHA,
        Correction::Bonferroni => ALPHA / dim as f64,
    };
    let segments = (0..dim)
        .map(|k| {
            let a: Vec<f64> = participants.iter().map(|p| p.domain(domain).a[k]).collect();
            let b: Vec<f64> = participants.iter().map(|p| p.domain(domain).b[k]).collect();
            let (mean_a, sd_a) = mean_sd(&a);
            let (mean_b, sd_b) = mean_sd(&b);
            let test = paired_t(&a, &b)?;
            Ok(SegmentStats {
                time_s: segment_times[k],
                mean_a,
                mean_b,
                ci95_a: t_crit * sd_a / (n as f64).sqrt(),
                ci95_b: t_crit * sd_b / (n as f64).sqrt(),
                t: test.t,
                df: test.df,
                p: test.p,
                significant: test.p < alpha_eff,
                degenerate_variance: test.degenerate_variance,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GroupStats {
        domain,
        n_participants: n,
        alpha: ALPHA,
        correction,
        segments,
    })
}
