use serde::{Deserialize, Serialize};

use super::ReferenceSample;
use crate::error::{Error, Result};

/// Minimum-jerk blend factor for normalised time `x` in `[0, 1]`.
pub fn minimum_jerk(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// A pose reached at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub q: Vec<f64>,
}

/// Closed-form references.
#[derive(Debug, Clone, PartialEq)]
pub enum Script {
    Constant(Vec<f64>),
    /// `before` for `t < at`, `after` from `at` on.
    Step {
        at: f64,
        before: Vec<f64>,
        after: Vec<f64>,
    },
    /// Minimum-jerk blends between consecutive keyframes, held at both ends.
    Keyframes(Vec<Keyframe>),
}

impl Script {
    /// Single minimum-jerk move from `from` to `to` over `[start, start + duration]`.
    pub fn min_jerk(start: f64, duration: f64, from: Vec<f64>, to: Vec<f64>) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::invalid(format!(
                "move duration must be positive, got {duration}"
            )));
        }
        Self::keyframes(vec![
            Keyframe { t: start, q: from },
            Keyframe {
                t: start + duration,
                q: to,
            },
        ])
    }

    /// Validates that keyframes are non-empty, equally sized and strictly increasing in time.
    pub fn keyframes(frames: Vec<Keyframe>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("script needs at least one keyframe"));
        };
        let n = first.q.len();
        if frames.iter().any(|k| k.q.len() != n) {
            return Err(Error::invalid("keyframes differ in length"));
        }
        if frames.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::invalid("keyframe times must strictly increase"));
        }
        Ok(Script::Keyframes(frames))
    }

    pub fn dofs(&self) -> usize {
        match self {
            Script::Constant(q) => q.len(),
            Script::Step { before, .. } => before.len(),
            Script::Keyframes(k) => k[0].q.len(),
        }
    }

    /// Time of the last change in the reference.
    pub fn end_time(&self) -> f64 {
        match self {
            Script::Constant(_) => 0.0,
            Script::Step { at, .. } => *at,
            Script::Keyframes(k) => k.last().map_or(0.0, |k| k.t),
        }
    }

    pub fn sample_at(&self, t: f64) -> ReferenceSample {
        let q_d = match self {
            Script::Constant(q) => q.clone(),
            Script::Step { at, before, after } => {
                if t < *at {
                    before.clone()
                } else {
                    after.clone()
                }
            }
            Script::Keyframes(frames) => {
                let k = frames.partition_point(|f| f.t <= t);
                if k == 0 {
                    frames[0].q.clone()
                } else if k == frames.len() {
                    frames[k - 1].q.clone()
                } else {
                    let (a, b) = (&frames[k - 1], &frames[k]);
                    let w = minimum_jerk((t - a.t) / (b.t - a.t));
                    a.q.iter().zip(&b.q).map(|(x, y)| x + (y - x) * w).collect()
                }
            }
        };
        ReferenceSample { t, q_d }
    }
}
