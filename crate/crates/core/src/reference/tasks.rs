//! Scripted references for the manipulation tasks, built from object geometry
//! with fingertip inverse kinematics.

use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{Keyframe, ReferenceProvider, Script};
use crate::error::{Error, Result};
use crate::hand::{
    fingertip_position, solve_fingertip_ik, HandModel, IkOptions, ObjectState, SceneObject, Shape,
};

/// Phase boundaries (seconds) of a reach-then-act task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTiming {
    /// Leave the rest pose.
    pub start: f64,
    /// Fingertips reach their pre-contact pose.
    pub reach: f64,
    /// Pressing, pulling or sweeping motion completes.
    pub act: f64,
}

impl TaskTiming {
    fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0 && self.reach > self.start && self.act > self.reach) {
            return Err(Error::invalid(format!(
                "task phases must strictly increase: start {} < reach {} < act {}",
                self.start, self.reach, self.act
            )));
        }
        Ok(())
    }
}

/// Phase boundaries (seconds) of a three-finger grasp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspTiming {
    pub start: f64,
    /// Thumb touches the object.
    pub thumb_contact: f64,
    /// Thumb settles into the object; may equal `thumb_contact`.
    pub thumb_adjusted: f64,
    /// First and little fingers close.
    pub closed: f64,
}

impl GraspTiming {
    fn validate(&self) -> Result<()> {
        let ok = self.start >= 0.0
            && self.thumb_contact > self.start
            && self.thumb_adjusted >= self.thumb_contact
            && self.closed > self.thumb_adjusted;
        if !ok {
            return Err(Error::invalid(format!(
                "grasp phases must increase: start {} < thumb contact {} <= thumb adjusted {} < closed {}",
                self.start, self.thumb_contact, self.thumb_adjusted, self.closed
            )));
        }
        Ok(())
    }
}

/// Joints IK may move for a fingertip: its own chain minus the wrist.
fn finger_joints(model: &HandModel, tip: usize) -> Vec<bool> {
    let mut mask = vec![false; model.dofs()];
    for &j in &model.fingertips()[tip].chain {
        mask[j] = !model.joints[j].name.starts_with("WR");
    }
    mask
}

fn tip_index(model: &HandModel, name: &str) -> Result<usize> {
    model
        .fingertip_index(name)
        .ok_or_else(|| Error::invalid(format!("model has no fingertip {name}")))
}

/// Moves one fingertip towards `target`, leaving every other joint of `q` alone.
/// Starts from `q` and, if that stalls short of the target, also from the middle
/// of the finger's joint ranges; the closer of the two wins.
fn reach(model: &HandModel, q: &[f64], tip: usize, target: Point3<f64>) -> Result<Vec<f64>> {
    let active = finger_joints(model, tip);
    let options = IkOptions {
        active: Some(active.clone()),
        max_iterations: 500,
        ..Default::default()
    };
    let mut best = solve_fingertip_ik(model, q, tip, &target, &options)?;
    if best.residual > 1e-3 {
        let mut mid = q.to_vec();
        for (j, joint) in model.joints.iter().enumerate() {
            if active[j] {
                mid[j] = 0.5 * (joint.limit_lo + joint.limit_hi);
            }
        }
        let alt = solve_fingertip_ik(model, &mid, tip, &target, &options)?;
        if alt.residual < best.residual {
            best = alt;
        }
    }
    if best.residual > 0.01 {
        log::warn!(
            "fingertip {} misses its target by {:.1} mm",
            model.fingertips()[tip].name,
            best.residual * 1e3
        );
    }
    Ok(best.q)
}

fn keyframe(t: f64, q: &[f64]) -> Keyframe {
    Keyframe { t, q: q.to_vec() }
}

/// Drops keyframes that coincide in time with their predecessor, keeping the later pose.
fn script(mut frames: Vec<Keyframe>) -> Result<ReferenceProvider> {
    frames.dedup_by(|later, earlier| {
        if later.t == earlier.t {
            earlier.q = later.q.clone();
            true
        } else {
            false
        }
    });
    Ok(ReferenceProvider::Scripted(Script::keyframes(frames)?))
}

/// Closest surface point to `p` and the outward normal there, at the nominal pose.
fn closest_surface(obj: &SceneObject, p: &Point3<f64>) -> (Point3<f64>, Vector3<f64>) {
    let (d, n) = obj.signed_distance(&ObjectState::default(), p);
    (p - n * d, n)
}

/// Thumb meets the ball, then the first and little fingers close around it.
///
/// Fingertips are commanded `squeeze` metres inside the surface so that the
/// controller, not the script, decides how hard the grasp is.
pub fn scripted_grasp_reference(
    model: &HandModel,
    object: &SceneObject,
    timing: GraspTiming,
    squeeze: f64,
) -> Result<ReferenceProvider> {
    timing.validate()?;
    let Shape::Sphere { radius } = object.shape else {
        return Err(Error::invalid(format!(
            "grasp target {} must be a sphere",
            object.id
        )));
    };
    let center = Point3::from(object.pose.translation.vector);
    let th = tip_index(model, "TH")?;
    let ff = tip_index(model, "FF")?;
    let lf = tip_index(model, "LF")?;
    let rest = model.rest_pose();
    let on_surface = |tip: usize, dir: Vector3<f64>, depth: f64| {
        center + dir.normalize() * (radius + model.fingertips()[tip].radius - depth)
    };

    let th_dir = Vector3::new(-1.0, 0.0, 0.0);
    let ff_dir = Vector3::new(1.0, 0.45, 0.15);
    let lf_dir = Vector3::new(1.0, -0.45, 0.15);

    let touch = reach(model, &rest, th, on_surface(th, th_dir, 0.0))?;
    let settled = reach(model, &touch, th, on_surface(th, th_dir, squeeze))?;
    let mut closed = settled.clone();
    for (tip, dir) in [(ff, ff_dir), (lf, lf_dir)] {
        let outside = reach(model, &closed, tip, on_surface(tip, dir, 0.0))?;
        closed = reach(model, &outside, tip, on_surface(tip, dir, squeeze))?;
    }
    script(vec![
        keyframe(timing.start, &rest),
        keyframe(timing.thumb_contact, &touch),
        keyframe(timing.thumb_adjusted, &settled),
        keyframe(timing.closed, &closed),
    ])
}

/// Fingertips hook behind a hinged panel's handle bar and pull it open by `pull` metres.
pub fn scripted_door_reference(
    model: &HandModel,
    object: &SceneObject,
    timing: TaskTiming,
    pull: f64,
) -> Result<ReferenceProvider> {
    timing.validate()?;
    let Shape::HingedPanel {
        handle_center,
        handle_axis,
        handle_radius,
        handle_half_length,
        ..
    } = object.shape
    else {
        return Err(Error::invalid(format!(
            "door target {} must be a hinged panel",
            object.id
        )));
    };
    let (pivot, axis) = object.axis().ok_or_else(|| {
        Error::invalid(format!("door {} needs a single-axis mobility", object.id))
    })?;
    let handle = object.pose * Point3::from(handle_center);
    let bar = (object.pose.rotation * Vector3::from(handle_axis)).normalize();
    // Direction the handle travels as the door opens.
    let opening = axis.cross(&(handle - pivot)).normalize();

    let rest = model.rest_pose();
    let (mut pre, mut hooked, mut pulled) = (rest.clone(), rest.clone(), rest.clone());
    for name in ["FF", "MF", "RF", "LF"] {
        let tip = tip_index(model, name)?;
        let r = model.fingertips()[tip].radius;
        let rest_tip = fingertip_position(model, &rest, tip)?;
        let along = (rest_tip - handle)
            .dot(&bar)
            .clamp(-handle_half_length, handle_half_length);
        let hook = handle + bar * along - opening * (handle_radius + r + 0.002);
        let above = hook - opening * 0.01 + Vector3::z() * (handle_radius + r + 0.01);
        pre = reach(model, &pre, tip, above)?;
        seed_finger(model, &mut hooked, &pre, tip);
        hooked = reach(model, &hooked, tip, hook)?;
        seed_finger(model, &mut pulled, &hooked, tip);
        pulled = reach(model, &pulled, tip, hook + opening * pull)?;
    }
    script(vec![
        keyframe(timing.start, &rest),
        keyframe(0.5 * (timing.start + timing.reach), &pre),
        keyframe(timing.reach, &hooked),
        keyframe(timing.act, &pulled),
    ])
}

/// First, middle and ring fingertips press on a rotor and sweep along its direction of
/// positive rotation through `sweep` radians.
pub fn scripted_cap_reference(
    model: &HandModel,
    object: &SceneObject,
    timing: TaskTiming,
    depth: f64,
    sweep: f64,
) -> Result<ReferenceProvider> {
    timing.validate()?;
    let (pivot, axis) = object
        .axis()
        .ok_or_else(|| Error::invalid(format!("cap {} needs a single-axis mobility", object.id)))?;
    let turn = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), sweep);
    let rest = model.rest_pose();
    let (mut pressed, mut swept) = (rest.clone(), rest.clone());
    for name in ["FF", "MF", "RF"] {
        let tip = tip_index(model, name)?;
        let r = model.fingertips()[tip].radius;
        let start = fingertip_position(model, &rest, tip)?;
        let (p, n) = closest_surface(object, &start);
        pressed = reach(model, &pressed, tip, p + n * (r - depth))?;
        seed_finger(model, &mut swept, &pressed, tip);
        swept = reach(
            model,
            &swept,
            tip,
            pivot + turn * (p - pivot) + turn * n * (r - depth),
        )?;
    }
    script(vec![
        keyframe(timing.start, &rest),
        keyframe(timing.reach, &pressed),
        keyframe(timing.act, &swept),
    ])
}

/// First, middle and ring fingertips move onto the surface point nearest
/// their rest position and press `depth` metres into its surface.
pub fn scripted_touch_reference(
    model: &HandModel,
    object: &SceneObject,
    timing: TaskTiming,
    depth: f64,
) -> Result<ReferenceProvider> {
    timing.validate()?;
    let rest = model.rest_pose();
    let mut above = rest.clone();
    let mut pressed = rest.clone();
    for name in ["FF", "MF", "RF"] {
        let tip = tip_index(model, name)?;
        let r = model.fingertips()[tip].radius;
        let start = fingertip_position(model, &rest, tip)?;
        let (p, n) = closest_surface(object, &start);
        above = reach(model, &above, tip, p + n * (r + 0.01))?;
        seed_finger(model, &mut pressed, &above, tip);
        pressed = reach(model, &pressed, tip, p + n * (r - depth))?;
    }
    script(vec![
        keyframe(timing.start, &rest),
        keyframe(timing.reach, &above),
        keyframe(timing.act, &pressed),
    ])
}

/// Copies one finger's joints from `from` into `into`.
fn seed_finger(model: &HandModel, into: &mut [f64], from: &[f64], tip: usize) {
    for &j in &model.fingertips()[tip].chain {
        into[j] = from[j];
    }
}
