//! Adaptive impedance and feedforward control for a simulated multi-finger hand.
//!
//! Stiffness, damping and feedforward torque profiles are encoded as weights
//! over a phase-indexed Gaussian basis and adapted online from the sliding
//! tracking error. A joint-space hand simulator with penalty contact, scripted
//! and live reference sources, and a scenario harness for controller
//! comparison are included.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod controller;
mod error;
pub mod hand;
pub mod reference;
pub mod scenario;
pub mod teleop;

pub use basis::{eval_basis, phase_step, GaussianBasis, PhaseState};
pub use controller::{
    adaptive_step, compliant_profiles, compute_torque, fixed_gain_step, position_mode_step,
    tracking_error, update_params, AdaptationGains, AdaptiveController, AdaptiveParams, Controller,
    ControllerKind, ImpedanceGains, Profiles, TorqueCommand, TrackingError,
};
pub use error::{Error, Result};
pub use hand::{ContactEvent, HandModel, JointState, Scene, SceneObject};
pub use reference::{ReferenceProvider, ReferenceSample};
pub use scenario::{
    compare_controllers, contact_dispersion, run_scenario, success_check, MetricsRecord, Scenario,
};
pub use teleop::{CommandMessage, StateMessage, TeleopHandle, TeleopSession};
