//! Desired joint trajectories: recorded files, scripted generators and a live
//! channel fed by teleoperation.

mod file;
mod live;
mod scripted;
mod tasks;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use file::{load_trajectory, parse_trajectory, save_trajectory, write_trajectory, Trajectory};
pub use live::{live_channel, LiveReference, LiveSender};
pub use scripted::{minimum_jerk, Keyframe, Script};
pub use tasks::{
    scripted_cap_reference, scripted_door_reference, scripted_grasp_reference,
    scripted_touch_reference, GraspTiming, TaskTiming,
};

/// Desired joint positions at time `t`. Desired velocity is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub t: f64,
    pub q_d: Vec<f64>,
}

/// Sample-and-hold with measurement noise, standing in for a camera-driven
/// teleoperation stream that refreshes every `period` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleopEmulation {
    pub period: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub limits: Vec<(f64, f64)>,
}

impl TeleopEmulation {
    fn apply(&self, inner: &ReferenceProvider, t: f64) -> ReferenceSample {
        let k = (t / self.period).floor();
        let mut s = inner.sample_at(k * self.period);
        s.t = t;
        if self.noise_std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(k as u64);
            let normal = Normal::new(0.0, self.noise_std).expect("noise std is finite");
            for (q, (lo, hi)) in s.q_d.iter_mut().zip(&self.limits) {
                *q = (*q + normal.sample(&mut rng)).clamp(*lo, *hi);
            }
        }
        s
    }
}

/// Source of desired joint positions, defined for every `t >= 0`.
#[derive(Debug, Clone)]
pub enum ReferenceProvider {
    File(Trajectory),
    Scripted(Script),
    Live(LiveReference),
    Teleop(Box<ReferenceProvider>, TeleopEmulation),
}

impl ReferenceProvider {
    pub fn sample_at(&self, t: f64) -> ReferenceSample {
        match self {
            ReferenceProvider::File(traj) => traj.sample_at(t),
            ReferenceProvider::Scripted(script) => script.sample_at(t),
            ReferenceProvider::Live(live) => live.sample_at(t),
            ReferenceProvider::Teleop(inner, emu) => emu.apply(inner, t),
        }
    }

    /// Wraps the provider in a sample-and-hold teleoperation stream.
    pub fn with_teleop(self, emulation: TeleopEmulation) -> Result<Self, crate::Error> {
        if !(emulation.period > 0.0) || !(emulation.noise_std >= 0.0) {
            return Err(crate::Error::invalid(
                "teleop emulation needs period > 0 and noise_std >= 0",
            ));
        }
        Ok(ReferenceProvider::Teleop(Box::new(self), emulation))
    }
}

/// Free-function form of [`ReferenceProvider::sample_at`].
pub fn sample_at(provider: &ReferenceProvider, t: f64) -> ReferenceSample {
    provider.sample_at(t)
}
