use std::collections::BTreeMap;

use nalgebra::{DVector, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::kinematics::fingertip_jacobian;
use super::{forward_kinematics, HandModel, Mobility, Scene, SceneState};
use crate::error::{ensure_len, Result};

/// One fingertip touching one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time: f64,
    pub fingertip: String,
    pub object: String,
    /// Contact point on the object surface, world frame.
    pub point: [f64; 3],
    /// Outward object normal at the contact, world frame.
    pub normal: [f64; 3],
    /// Magnitude of the total contact force, N.
    pub force_magnitude: f64,
}

/// A contact together with what it does to the hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub event: ContactEvent,
    pub fingertip: usize,
    pub object: usize,
    pub penetration: f64,
    /// Force on the fingertip (the object receives the opposite).
    pub force: Vector3<f64>,
    pub normal_force: f64,
    /// Joint torques from this contact alone.
    pub joint_torque: Vec<f64>,
}

/// All contacts at one instant and their summed effect.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactFrame {
    pub contacts: Vec<Contact>,
    /// Sum of per-contact joint torques.
    pub joint_torque: Vec<f64>,
    /// Net reaction force on each object.
    pub object_force: Vec<Vector3<f64>>,
    /// Net reaction torque about each single-axis object's axis.
    pub object_torque: Vec<f64>,
    /// Stiction anchors after this evaluation.
    pub anchors: BTreeMap<(usize, usize), Point3<f64>>,
}

impl ContactFrame {
    pub fn events(&self) -> impl Iterator<Item = &ContactEvent> {
        self.contacts.iter().map(|c| &c.event)
    }
}

/// Penalty contact between fingertip spheres and scene objects.
///
/// Penetration `delta` gives a normal force `k_c delta + b_c max(0, d delta/dt)`,
/// so damping acts only while the fingertip presses in and the force never
/// turns adhesive. Friction is a tangential spring anchored where the contact
/// began, capped at `mu f_n`; the anchor slides when the cap is reached.
pub fn detect_contacts(
    model: &HandModel,
    q: &[f64],
    q_dot: &[f64],
    scene: &Scene,
    scene_state: &SceneState,
    time: f64,
) -> Result<ContactFrame> {
    let n = model.dofs();
    ensure_len("joint positions", q.len(), n)?;
    ensure_len("joint velocities", q_dot.len(), n)?;
    ensure_len(
        "object states",
        scene_state.objects.len(),
        scene.objects.len(),
    )?;
    let mut frame = ContactFrame {
        contacts: Vec::new(),
        joint_torque: vec![0.0; n],
        object_force: vec![Vector3::zeros(); scene.objects.len()],
        object_torque: vec![0.0; scene.objects.len()],
        anchors: BTreeMap::new(),
    };
    if scene.objects.is_empty() {
        return Ok(frame);
    }
    let kin = forward_kinematics(model, q)?;
    let qd = DVector::from_column_slice(q_dot);
    for (tip, spec) in model.fingertips().iter().enumerate() {
        let center = kin.fingertips[tip];
        let mut jac = None;
        for (oi, obj) in scene.objects.iter().enumerate() {
            let ostate = &scene_state.objects[oi];
            let (dist, normal) = obj.signed_distance(ostate, &center);
            let penetration = spec.radius - dist;
            if penetration <= 0.0 {
                continue;
            }
            let j = jac.get_or_insert_with(|| {
                fingertip_jacobian(model, q, tip).expect("fingertip index is valid")
            });
            let point = center - normal * dist;
            let tip_vel = Vector3::from_iterator((&*j * &qd).iter().copied());
            let rel = tip_vel - obj.point_velocity(ostate, &point);
            let rel_n = rel.dot(&normal);
            let mat = &obj.material;
            let f_n = mat.stiffness * penetration + mat.damping * (-rel_n).max(0.0);
            let rel_t = rel - normal * rel_n;

            let to_world = obj.transform(ostate);
            let anchor = scene_state
                .anchors
                .get(&(tip, oi))
                .map(|a| to_world * a)
                .unwrap_or(point);
            let mut slip = point - anchor;
            slip -= normal * slip.dot(&normal);
            let mut f_t = -(slip * mat.stiffness) - rel_t * mat.damping;
            let cap = mat.friction * f_n;
            let mag = f_t.norm();
            let anchor = if mag > cap {
                f_t *= cap / mag;
                // Re-seat the anchor so the spring alone carries the capped force.
                point + f_t / mat.stiffness
            } else {
                point - slip
            };
            frame
                .anchors
                .insert((tip, oi), to_world.inverse_transform_point(&anchor));

            let force = normal * f_n + f_t;
            let torque: Vec<f64> = (j.transpose() * force).iter().copied().collect();
            for (acc, t) in frame.joint_torque.iter_mut().zip(&torque) {
                *acc += t;
            }
            match obj.mobility {
                Mobility::Free { .. } => frame.object_force[oi] -= force,
                Mobility::SingleAxis { .. } => {
                    let (pivot, axis) = obj.axis().expect("single-axis object");
                    frame.object_torque[oi] += (point - pivot).cross(&(-force)).dot(&axis);
                    frame.object_force[oi] -= force;
                }
                Mobility::Fixed => frame.object_force[oi] -= force,
            }
            frame.contacts.push(Contact {
                event: ContactEvent {
                    time,
                    fingertip: spec.name.clone(),
                    object: obj.id.clone(),
                    point: point.coords.into(),
                    normal: normal.into(),
                    force_magnitude: force.norm(),
                },
                fingertip: tip,
                object: oi,
                penetration,
                force,
                normal_force: f_n,
                joint_torque: torque,
            });
        }
    }
    Ok(frame)
}
