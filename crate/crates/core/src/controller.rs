//! Joint-space force controllers.
//!
//! The adaptive controller commands `tau = -(Ks e + Kd e_dot) - v`, where the
//! stiffness `Ks`, damping `Kd` and feedforward `v` are per-joint profiles
//! reconstructed every tick as inner products of parameter rows with the
//! basis activations `g`. The parameters follow the sliding error
//! `eps = e_dot + pi e`:
//!
//! ```text
//! d/dt theta_k[n] = q_k[n] eps[n] e[n]     g
//! d/dt theta_d[n] = q_d[n] eps[n] e_dot[n] g
//! d/dt theta_v[n] = q_v[n] eps[n]          g
//! ```
//!
//! integrated with explicit Euler at the control period. Two baselines share
//! the torque law without adaptation: a fixed-gain impedance controller and a
//! stiff PD tracker that stands in for a servo position mode.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{phase_step_scaled, GaussianBasis, PhaseState};
use crate::error::{ensure_len, Error, Result};
use crate::hand::JointState;
use crate::reference::ReferenceSample;

/// Stiffness, damping and feedforward parameter matrices, each `N_r x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParams {
    pub theta_k: DMatrix<f64>,
    pub theta_d: DMatrix<f64>,
    pub theta_v: DMatrix<f64>,
}

impl AdaptiveParams {
    pub fn zeros(dofs: usize, basis_len: usize) -> Self {
        Self {
            theta_k: DMatrix::zeros(dofs, basis_len),
            theta_d: DMatrix::zeros(dofs, basis_len),
            theta_v: DMatrix::zeros(dofs, basis_len),
        }
    }

    /// Parameters whose profiles start at `ks_init` / `kd_init` for any
    /// normalized activation, with zero feedforward.
    pub fn initial(dofs: usize, basis_len: usize, ks_init: f64, kd_init: f64) -> Self {
        Self {
            theta_k: DMatrix::from_element(dofs, basis_len, ks_init),
            theta_d: DMatrix::from_element(dofs, basis_len, kd_init),
            theta_v: DMatrix::zeros(dofs, basis_len),
        }
    }

    /// Like [`AdaptiveParams::initial`] with a starting stiffness and damping per joint.
    pub fn initial_per_joint(ks_init: &[f64], kd_init: &[f64], basis_len: usize) -> Result<Self> {
        ensure_len("initial damping", kd_init.len(), ks_init.len())?;
        let dofs = ks_init.len();
        Ok(Self {
            theta_k: DMatrix::from_fn(dofs, basis_len, |i, _| ks_init[i]),
            theta_d: DMatrix::from_fn(dofs, basis_len, |i, _| kd_init[i]),
            theta_v: DMatrix::zeros(dofs, basis_len),
        })
    }

    pub fn dofs(&self) -> usize {
        self.theta_k.nrows()
    }

    pub fn basis_len(&self) -> usize {
        self.theta_k.ncols()
    }

    fn check_shape(&self) -> Result<()> {
        let shape = self.theta_k.shape();
        if self.theta_d.shape() != shape || self.theta_v.shape() != shape {
            return Err(Error::invalid(format!(
                "parameter matrices disagree in shape: {:?}, {:?}, {:?}",
                shape,
                self.theta_d.shape(),
                self.theta_v.shape()
            )));
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        for (name, m) in [
            ("theta_k", &self.theta_k),
            ("theta_d", &self.theta_d),
            ("theta_v", &self.theta_v),
        ] {
            if let Some(idx) = m.iter().position(|x| !x.is_finite()) {
                let (row, col) = (idx % m.nrows(), idx / m.nrows());
                return Err(Error::ControllerFault(format!(
                    "{name}[{row}][{col}] = {} after update",
                    m[(row, col)]
                )));
            }
        }
        Ok(())
    }
}

/// Per-joint learning rates and the sliding-error blend `pi` (1/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationGains {
    pub q_k: Vec<f64>,
    pub q_d: Vec<f64>,
    pub q_v: Vec<f64>,
    pub pi: f64,
}

impl AdaptationGains {
    pub fn new(q_k: Vec<f64>, q_d: Vec<f64>, q_v: Vec<f64>, pi: f64) -> Result<Self> {
        ensure_len("q_d gains", q_d.len(), q_k.len())?;
        ensure_len("q_v gains", q_v.len(), q_k.len())?;
        for (name, v) in [("q_k", &q_k), ("q_d", &q_d), ("q_v", &q_v)] {
            if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::invalid(format!(
                    "{name} entries must be positive, got {x}"
                )));
            }
        }
        if !(pi > 0.0 && pi.is_finite()) {
            return Err(Error::invalid(format!("pi must be positive, got {pi}")));
        }
        Ok(Self { q_k, q_d, q_v, pi })
    }

    /// Same rates on every joint.
    pub fn uniform(dofs: usize, q_k: f64, q_d: f64, q_v: f64, pi: f64) -> Result<Self> {
        Self::new(vec![q_k; dofs], vec![q_d; dofs], vec![q_v; dofs], pi)
    }

    pub fn dofs(&self) -> usize {
        self.q_k.len()
    }
}

/// Position error, velocity error and sliding error per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    pub e: Vec<f64>,
    pub e_dot: Vec<f64>,
    pub eps: Vec<f64>,
}

impl TrackingError {
    /// Builds the error from its two measured parts; `eps` is always derived.
    pub fn new(e: Vec<f64>, e_dot: Vec<f64>, pi: f64) -> Result<Self> {
        ensure_len("velocity error", e_dot.len(), e.len())?;
        let eps = e.iter().zip(&e_dot).map(|(e, ed)| ed + pi * e).collect();
        Ok(Self { e, e_dot, eps })
    }

    pub fn dofs(&self) -> usize {
        self.e.len()
    }

    pub fn rms(&self) -> (f64, f64) {
        let n = self.e.len().max(1) as f64;
        let e = (self.e.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
        let eps = (self.eps.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
        (e, eps)
    }
}

/// Joint torques after saturation, with the joints that were clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCommand {
    pub tau: Vec<f64>,
    pub clamped_mask: Vec<bool>,
}

impl TorqueCommand {
    pub fn zeros(dofs: usize) -> Self {
        Self {
            tau: vec![0.0; dofs],
            clamped_mask: vec![false; dofs],
        }
    }
}

/// Per-joint stiffness, damping and feedforward for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub ks: Vec<f64>,
    pub kd: Vec<f64>,
    pub v: Vec<f64>,
}

/// Sliding error against a reference whose desired velocity is zero.
pub fn tracking_error(
    state: &JointState,
    reference: &ReferenceSample,
    pi: f64,
) -> Result<TrackingError> {
    ensure_len("joint velocities", state.q_dot.len(), state.q.len())?;
    ensure_len("reference", reference.q_d.len(), state.q.len())?;
    let e = state
        .q
        .iter()
        .zip(&reference.q_d)
        .map(|(q, qd)| q - qd)
        .collect();
    TrackingError::new(e, state.q_dot.clone(), pi)
}

/// Reconstructs the profiles from the parameters and activations `g`.
///
/// Stiffness and damping are floored at zero; the parameters themselves are
/// left as the update law made them.
pub fn compliant_profiles(params: &AdaptiveParams, g: &[f64]) -> Result<Profiles> {
    params.check_shape()?;
    ensure_len("basis activations", g.len(), params.basis_len())?;
    let mut out = Profiles {
        ks: vec![0.0; params.dofs()],
        kd: vec![0.0; params.dofs()],
        v: vec![0.0; params.dofs()],
    };
    profiles_into(params, g, &mut out);
    Ok(out)
}

fn row_dot(m: &DMatrix<f64>, row: usize, g: &[f64]) -> f64 {
    g.iter().enumerate().map(|(j, gj)| m[(row, j)] * gj).sum()
}

fn profiles_into(params: &AdaptiveParams, g: &[f64], out: &mut Profiles) {
    for n in 0..params.dofs() {
        out.ks[n] = row_dot(&params.theta_k, n, g).max(0.0);
        out.kd[n] = row_dot(&params.theta_d, n, g).max(0.0);
        out.v[n] = row_dot(&params.theta_v, n, g);
    }
}

/// `tau = -(Ks e + Kd e_dot) - v`, saturated to `+-tau_max`.
///
/// All slices must have the controller's joint count.
pub fn compute_torque(err: &TrackingError, profiles: &Profiles, tau_max: &[f64]) -> TorqueCommand {
    let n = err.dofs();
    debug_assert!(profiles.ks.len() == n && profiles.kd.len() == n && profiles.v.len() == n);
    debug_assert_eq!(tau_max.len(), n);
    let mut cmd = TorqueCommand::zeros(n);
    for i in 0..n {
        let u = profiles.ks[i] * err.e[i] + profiles.kd[i] * err.e_dot[i];
        let raw = -u - profiles.v[i];
        let clipped = raw.clamp(-tau_max[i], tau_max[i]);
        cmd.clamped_mask[i] = clipped != raw;
        cmd.tau[i] = clipped;
    }
    cmd
}

/// One explicit-Euler step of the adaptation law.
pub fn update_params(
    params: &AdaptiveParams,
    gains: &AdaptationGains,
    err: &TrackingError,
    g: &[f64],
    dt: f64,
) -> Result<AdaptiveParams> {
    let mut next = params.clone();
    update_params_in_place(&mut next, gains, err, g, dt, 0.0)?;
    Ok(next)
}

/// In-place form of [`update_params`] with an optional forgetting rate.
///
/// `decay > 0` adds `-decay * theta` to every rate; `0.0` is the plain law.
/// Rows whose sliding error is exactly zero are not touched when `decay` is
/// zero, so a zero-error tick leaves the parameters bit-identical.
pub fn update_params_in_place(
    params: &mut AdaptiveParams,
    gains: &AdaptationGains,
    err: &TrackingError,
    g: &[f64],
    dt: f64,
    decay: f64,
) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!(
            "update step needs dt > 0, got {dt}"
        )));
    }
    params.check_shape()?;
    ensure_len("gains", gains.dofs(), params.dofs())?;
    ensure_len("tracking error", err.dofs(), params.dofs())?;
    ensure_len("basis activations", g.len(), params.basis_len())?;

    for n in 0..params.dofs() {
        let eps = err.eps[n];
        if eps == 0.0 && decay == 0.0 {
            continue;
        }
        let rate_k = gains.q_k[n] * eps * err.e[n] * dt;
        let rate_d = gains.q_d[n] * eps * err.e_dot[n] * dt;
        let rate_v = gains.q_v[n] * eps * dt;
        for (j, &gj) in g.iter().enumerate() {
            let idx = (n, j);
            if decay != 0.0 {
                params.theta_k[idx] -= decay * params.theta_k[idx] * dt;
                params.theta_d[idx] -= decay * params.theta_d[idx] * dt;
                params.theta_v[idx] -= decay * params.theta_v[idx] * dt;
            }
            params.theta_k[idx] += rate_k * gj;
            params.theta_d[idx] += rate_d * gj;
            params.theta_v[idx] += rate_v * gj;
        }
    }
    params.check_finite()
}

/// `0.5 * sum_i m_i eps_i^2` with a diagonal inertia. Reported only.
pub fn diagnostic_tracking_cost(err: &TrackingError, inertia: &[f64]) -> f64 {
    0.5 * err
        .eps
        .iter()
        .zip(inertia)
        .map(|(eps, m)| m * eps * eps)
        .sum::<f64>()
}

/// Everything the adaptive loop carries between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveController {
    pub basis: GaussianBasis,
    pub phase: PhaseState,
    pub phase_tau: f64,
    pub params: AdaptiveParams,
    pub gains: AdaptationGains,
    pub tau_max: Vec<f64>,
    pub gain_decay: f64,
    g: Vec<f64>,
}

impl AdaptiveController {
    pub fn new(
        basis: GaussianBasis,
        phase_tau: f64,
        params: AdaptiveParams,
        gains: AdaptationGains,
        tau_max: Vec<f64>,
    ) -> Result<Self> {
        params.check_shape()?;
        ensure_len("parameter columns", params.basis_len(), basis.len())?;
        ensure_len("gains", gains.dofs(), params.dofs())?;
        ensure_len("torque limits", tau_max.len(), params.dofs())?;
        if !(phase_tau > 0.0) {
            return Err(Error::invalid(format!(
                "phase_tau must be positive, got {phase_tau}"
            )));
        }
        let phase = PhaseState::new(basis.s0())?;
        let g = basis.eval(phase.s);
        Ok(Self {
            basis,
            phase,
            phase_tau,
            params,
            gains,
            tau_max,
            gain_decay: 0.0,
            g,
        })
    }

    pub fn with_gain_decay(mut self, decay: f64) -> Self {
        self.gain_decay = decay;
        self
    }

    pub fn dofs(&self) -> usize {
        self.params.dofs()
    }

    /// Activations from the most recent step.
    pub fn activations(&self) -> &[f64] {
        &self.g
    }

    /// Restarts the phase clock; learned parameters are kept.
    pub fn reset_phase(&mut self) {
        self.phase = PhaseState { s: self.basis.s0() };
        self.g = self.basis.eval(self.phase.s);
    }

    /// Advance phase, evaluate basis, measure error, adapt, then command.
    pub fn step(
        &mut self,
        state: &JointState,
        reference: &ReferenceSample,
        dt: f64,
    ) -> Result<StepOutput> {
        self.phase = phase_step_scaled(self.phase, dt, self.phase_tau)?;
        self.basis.eval_into(self.phase.s, &mut self.g);
        let err = tracking_error(state, reference, self.gains.pi)?;
        update_params_in_place(
            &mut self.params,
            &self.gains,
            &err,
            &self.g,
            dt,
            self.gain_decay,
        )?;
        let profiles = compliant_profiles(&self.params, &self.g)?;
        let torque = compute_torque(&err, &profiles, &self.tau_max);
        Ok(StepOutput {
            torque,
            error: err,
            profiles,
        })
    }
}

/// Value-semantics form of [`AdaptiveController::step`].
pub fn adaptive_step(
    ctrl: &AdaptiveController,
    state: &JointState,
    reference: &ReferenceSample,
    dt: f64,
) -> Result<(TorqueCommand, AdaptiveController)> {
    let mut next = ctrl.clone();
    let out = next.step(state, reference, dt)?;
    Ok((out.torque, next))
}

/// Constant stiffness and damping per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceGains {
    pub ks: Vec<f64>,
    pub kd: Vec<f64>,
}

impl ImpedanceGains {
    pub fn uniform(dofs: usize, ks: f64, kd: f64) -> Self {
        Self {
            ks: vec![ks; dofs],
            kd: vec![kd; dofs],
        }
    }
}

/// Fixed-gain impedance control with no feedforward.
pub fn fixed_gain_step(
    state: &JointState,
    reference: &ReferenceSample,
    gains: &ImpedanceGains,
    tau_max: &[f64],
) -> Result<TorqueCommand> {
    Ok(impedance_output(state, reference, gains, tau_max, 1.0)?.torque)
}

/// Stiff PD tracking emulating a servo position mode; same law as
/// [`fixed_gain_step`] with the hand's position-mode gains.
pub fn position_mode_step(
    state: &JointState,
    reference: &ReferenceSample,
    stiff_gains: &ImpedanceGains,
    tau_max: &[f64],
) -> Result<TorqueCommand> {
    fixed_gain_step(state, reference, stiff_gains, tau_max)
}

fn impedance_output(
    state: &JointState,
    reference: &ReferenceSample,
    gains: &ImpedanceGains,
    tau_max: &[f64],
    pi: f64,
) -> Result<StepOutput> {
    let err = tracking_error(state, reference, pi)?;
    ensure_len("stiffness gains", gains.ks.len(), err.dofs())?;
    ensure_len("damping gains", gains.kd.len(), err.dofs())?;
    ensure_len("torque limits", tau_max.len(), err.dofs())?;
    let profiles = Profiles {
        ks: gains.ks.clone(),
        kd: gains.kd.clone(),
        v: vec![0.0; err.dofs()],
    };
    let torque = compute_torque(&err, &profiles, tau_max);
    Ok(StepOutput {
        torque,
        error: err,
        profiles,
    })
}

/// Which control law drives the hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Adaptive,
    Fixed,
    Position,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Adaptive,
        ControllerKind::Fixed,
        ControllerKind::Position,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Adaptive => "adaptive",
            ControllerKind::Fixed => "fixed",
            ControllerKind::Position => "position",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(ControllerKind::Adaptive),
            "fixed" => Ok(ControllerKind::Fixed),
            "position" => Ok(ControllerKind::Position),
            other => Err(Error::invalid(format!(
                "unknown controller type {other:?} (expected adaptive, fixed or position)"
            ))),
        }
    }
}

/// Output of one control tick, whatever the law.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub torque: TorqueCommand,
    pub error: TrackingError,
    pub profiles: Profiles,
}

/// A controller instance owned by one control loop.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Controller {
    Adaptive(AdaptiveController),
    /// `pi` is only used to report the sliding error.
    Fixed {
        gains: ImpedanceGains,
        tau_max: Vec<f64>,
        pi: f64,
    },
    Position {
        gains: ImpedanceGains,
        tau_max: Vec<f64>,
        pi: f64,
    },
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Adaptive(_) => ControllerKind::Adaptive,
            Controller::Fixed { .. } => ControllerKind::Fixed,
            Controller::Position { .. } => ControllerKind::Position,
        }
    }

    pub fn step(
        &mut self,
        state: &JointState,
        reference: &ReferenceSample,
        dt: f64,
    ) -> Result<StepOutput> {
        match self {
            Controller::Adaptive(c) => c.step(state, reference, dt),
            Controller::Fixed { gains, tau_max, pi }
            | Controller::Position { gains, tau_max, pi } => {
                impedance_output(state, reference, gains, tau_max, *pi)
            }
        }
    }
}
