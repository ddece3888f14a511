//! Breakpoint functions: sparse `(time, value)` points evaluated by linear
//! interpolation, held constant outside the first and last point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Breakpoints {
    points: Vec<(f64, f64)>,
}

impl Breakpoints {
    /// Times must be finite and strictly increasing; at least one point is required.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidBreakpoints("no points".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidBreakpoints("non-finite point".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidBreakpoints(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Breakpoints { points })
    }

    pub fn constant(value: f64) -> Self {
        Breakpoints {
            points: vec![(0.0, value)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        // first index whose time is > t; t is strictly inside so 1 <= i < len
        let i = pts.partition_point(|p| p.0 <= t);
        let (t0, v0) = pts[i - 1];
        let (t1, v1) = pts[i];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

impl TryFrom<Vec<(f64, f64)>> for Breakpoints {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Breakpoints::new(points)
    }
}

impl From<Breakpoints> for Vec<(f64, f64)> {
    fn from(b: Breakpoints) -> Self {
        b.points
    }
}
