use serde::{Deserialize, Serialize};

use super::{detect_contacts, forward_kinematics, gravity_torques, ContactFrame, HandModel};
use super::{Mobility, ObjectState, Scene, SceneState};
use crate::controller::TorqueCommand;
use crate::error::{ensure_len, Error, Result};

/// Joint positions and velocities at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub t: f64,
}

impl JointState {
    pub fn at_rest(q: Vec<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            q_dot: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn kinetic_energy(&self, inertia: &[f64]) -> f64 {
        self.q_dot
            .iter()
            .zip(inertia)
            .map(|(v, m)| 0.5 * m * v * v)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: JointState,
    pub scene_state: SceneState,
    /// Contacts evaluated at the start of the step.
    pub contacts: ContactFrame,
}

/// Advances the hand and the scene objects by `dt` with semi-implicit Euler.
///
/// Each joint is an independent rotor `I q'' = tau - c q' + tau_contact +
/// tau_gravity + tau_external`; contacts couple joints through the fingertip
/// Jacobian. Joints reaching a limit are clamped and lose the velocity that
/// points further into it.
pub fn step_dynamics(
    model: &HandModel,
    state: &JointState,
    tau: &TorqueCommand,
    scene: &Scene,
    scene_state: &SceneState,
    dt: f64,
) -> Result<StepResult> {
    let n = model.dofs();
    ensure_len("joint positions", state.q.len(), n)?;
    ensure_len("joint velocities", state.q_dot.len(), n)?;
    ensure_len("torque command", tau.tau.len(), n)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!(
            "dynamics step needs dt > 0, got {dt}"
        )));
    }
    if !scene.external_torque.is_empty() {
        ensure_len("external torque", scene.external_torque.len(), n)?;
    }

    let contacts = detect_contacts(model, &state.q, &state.q_dot, scene, scene_state, state.t)?;
    let gravity = if model.gravity.norm() > 0.0 {
        gravity_torques(model, &forward_kinematics(model, &state.q)?)
    } else {
        vec![0.0; n]
    };

    let mut next = state.clone();
    next.t = state.t + dt;
    for i in 0..n {
        let j = &model.joints[i];
        let mut total =
            tau.tau[i] - j.damping * state.q_dot[i] + contacts.joint_torque[i] + gravity[i];
        if let Some(ext) = scene.external_torque.get(i) {
            total += ext;
        }
        let v = state.q_dot[i] + total / j.inertia * dt;
        let mut q = state.q[i] + v * dt;
        let mut v = v;
        if q < j.limit_lo {
            q = j.limit_lo;
            v = v.max(0.0);
        } else if q > j.limit_hi {
            q = j.limit_hi;
            v = v.min(0.0);
        }
        next.q[i] = q;
        next.q_dot[i] = v;
    }

    let mut next_scene = SceneState {
        objects: scene_state.objects.clone(),
        anchors: contacts.anchors.clone(),
    };
    for (oi, obj) in scene.objects.iter().enumerate() {
        let s = &mut next_scene.objects[oi];
        match obj.mobility {
            Mobility::Fixed => {}
            Mobility::Free { mass, release_at } => {
                if state.t < release_at {
                    s.velocity.fill(0.0);
                } else {
                    let acc = contacts.object_force[oi] / mass + model.gravity;
                    s.velocity += acc * dt;
                    s.offset += s.velocity * dt;
                }
            }
            Mobility::SingleAxis {
                inertia,
                viscous,
                coulomb,
                range,
            } => step_axis(
                s,
                contacts.object_torque[oi],
                inertia,
                viscous,
                coulomb,
                range,
                dt,
            ),
        }
    }

    let finite = next.q.iter().chain(&next.q_dot).all(|x| x.is_finite())
        && next_scene.objects.iter().all(|o| {
            o.offset
                .iter()
                .chain(o.velocity.iter())
                .all(|x| x.is_finite())
                && o.angle.is_finite()
                && o.rate.is_finite()
        });
    if !finite {
        return Err(Error::SimulationFault {
            time: next.t,
            message: "non-finite state after integration".into(),
            dump: format!(
                "q = {:?}\nq_dot = {:?}\ntau = {:?}\nobjects = {:?}",
                next.q, next.q_dot, tau.tau, next_scene.objects
            ),
        });
    }
    Ok(StepResult {
        state: next,
        scene_state: next_scene,
        contacts,
    })
}

fn step_axis(
    s: &mut ObjectState,
    torque: f64,
    inertia: f64,
    viscous: f64,
    coulomb: f64,
    range: Option<[f64; 2]>,
    dt: f64,
) {
    let mut rate = s.rate + (torque - viscous * s.rate) / inertia * dt;
    // Coulomb friction as a bounded impulse: it can stop the axis but never reverse it.
    let stop = coulomb / inertia * dt;
    rate = if rate.abs() <= stop {
        0.0
    } else {
        rate - stop * rate.signum()
    };
    let mut angle = s.angle + rate * dt;
    if let Some([lo, hi]) = range {
        if angle < lo {
            angle = lo;
            rate = rate.max(0.0);
        } else if angle > hi {
            angle = hi;
            rate = rate.min(0.0);
        }
    }
    s.angle = angle;
    s.rate = rate;
}
