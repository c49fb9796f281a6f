use nalgebra::{
    DMatrix, DVector, Isometry3, Matrix3xX, Point3, Translation3, UnitQuaternion, Vector3,
};

use super::HandModel;
use crate::error::{ensure_len, Error, Result};

/// Joint frames, link end points and fingertip centres for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    /// Frame of each joint after its rotation; its x axis runs along the link.
    pub frames: Vec<Isometry3<f64>>,
    pub link_ends: Vec<Point3<f64>>,
    pub fingertips: Vec<Point3<f64>>,
}

impl Kinematics {
    /// World position of joint `i`'s rotation axis origin.
    pub fn joint_origin(&self, i: usize) -> Point3<f64> {
        Point3::from(self.frames[i].translation.vector)
    }
}

fn mount(model: &HandModel, i: usize, parent: &Isometry3<f64>, qi: f64) -> Isometry3<f64> {
    let j = &model.joints[i];
    let fixed = UnitQuaternion::from_euler_angles(j.rpy.x, j.rpy.y, j.rpy.z);
    let joint = UnitQuaternion::from_axis_angle(&j.axis, qi);
    parent * Isometry3::from_parts(Translation3::from(j.origin), fixed * joint)
}

fn link_end(model: &HandModel, i: usize, frame: &Isometry3<f64>) -> Point3<f64> {
    frame * Point3::new(model.links[i].length, 0.0, 0.0)
}

/// Chains joint rotations from the base out to every link.
pub fn forward_kinematics(model: &HandModel, q: &[f64]) -> Result<Kinematics> {
    ensure_len("joint positions", q.len(), model.dofs())?;
    let n = model.dofs();
    let mut frames = vec![Isometry3::identity(); n];
    for &i in model.order() {
        let parent = match model.joints[i].parent {
            Some(p) => frames[p],
            None => Isometry3::identity(),
        };
        frames[i] = mount(model, i, &parent, q[i]);
    }
    let link_ends: Vec<Point3<f64>> = (0..n).map(|i| link_end(model, i, &frames[i])).collect();
    let fingertips = model
        .fingertips()
        .iter()
        .map(|f| link_ends[f.link])
        .collect();
    Ok(Kinematics {
        frames,
        link_ends,
        fingertips,
    })
}

fn chain_tip(model: &HandModel, chain: &[usize], q: &[f64]) -> Point3<f64> {
    let mut frame = Isometry3::identity();
    for &i in chain {
        frame = mount(model, i, &frame, q[i]);
    }
    let last = *chain.last().expect("fingertip chains are non-empty");
    link_end(model, last, &frame)
}

fn tip_chain(model: &HandModel, tip: usize) -> Result<&[usize]> {
    model
        .fingertips()
        .get(tip)
        .map(|f| f.chain.as_slice())
        .ok_or_else(|| {
            Error::invalid(format!(
                "unknown fingertip {tip} (model has {})",
                model.fingertips().len()
            ))
        })
}

/// Centre of fingertip `tip`, evaluating only its own chain.
pub fn fingertip_position(model: &HandModel, q: &[f64], tip: usize) -> Result<Point3<f64>> {
    ensure_len("joint positions", q.len(), model.dofs())?;
    Ok(chain_tip(model, tip_chain(model, tip)?, q))
}

/// Step used by the central-difference Jacobian, rad.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// `3 x N_r` derivative of the fingertip centre with respect to `q`.
///
/// Central differences over the fingertip's chain; columns for joints off the
/// chain are zero.
pub fn fingertip_jacobian(model: &HandModel, q: &[f64], tip: usize) -> Result<Matrix3xX<f64>> {
    ensure_len("joint positions", q.len(), model.dofs())?;
    let chain = tip_chain(model, tip)?;
    let mut jac = Matrix3xX::zeros(model.dofs());
    let mut probe = q.to_vec();
    for &i in chain {
        let q0 = probe[i];
        probe[i] = q0 + JACOBIAN_STEP;
        let plus = chain_tip(model, chain, &probe);
        probe[i] = q0 - JACOBIAN_STEP;
        let minus = chain_tip(model, chain, &probe);
        probe[i] = q0;
        jac.set_column(i, &((plus - minus) / (2.0 * JACOBIAN_STEP)));
    }
    Ok(jac)
}

/// Joint torques from gravity acting on every link's centre of mass.
pub fn gravity_torques(model: &HandModel, kin: &Kinematics) -> Vec<f64> {
    let n = model.dofs();
    let mut tau = vec![0.0; n];
    if model.gravity == Vector3::zeros() {
        return tau;
    }
    let coms: Vec<Point3<f64>> = (0..n)
        .map(|k| kin.frames[k] * Point3::from(model.links[k].com))
        .collect();
    for (i, t) in tau.iter_mut().enumerate() {
        let axis = kin.frames[i].rotation * model.joints[i].axis.into_inner();
        let origin = kin.joint_origin(i);
        for &k in model.subtree(i) {
            let mass = model.links[k].mass;
            if mass == 0.0 {
                continue;
            }
            let moment = (coms[k] - origin).cross(&(model.gravity * mass));
            *t += axis.dot(&moment);
        }
    }
    tau
}

#[derive(Debug, Clone)]
pub struct IkOptions {
    /// Joints the solver may move; all chain joints when `None`.
    pub active: Option<Vec<bool>>,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            active: None,
            damping: 0.01,
            tolerance: 1e-6,
            max_iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: Vec<f64>,
    /// Remaining distance between the fingertip and the target, m.
    pub residual: f64,
}

/// Damped least-squares position IK for one fingertip, respecting joint limits.
pub fn solve_fingertip_ik(
    model: &HandModel,
    q_init: &[f64],
    tip: usize,
    target: &Point3<f64>,
    opts: &IkOptions,
) -> Result<IkSolution> {
    ensure_len("joint positions", q_init.len(), model.dofs())?;
    let chain = tip_chain(model, tip)?;
    let active: Vec<usize> = chain
        .iter()
        .copied()
        .filter(|&i| opts.active.as_ref().map_or(true, |a| a[i]))
        .collect();
    let mut q = q_init.to_vec();
    model.clamp_to_limits(&mut q);
    let mut residual = (target - chain_tip(model, chain, &q)).norm();
    let lambda2 = opts.damping * opts.damping;
    for _ in 0..opts.max_iterations {
        if residual < opts.tolerance || active.is_empty() {
            break;
        }
        let err = target - chain_tip(model, chain, &q);
        let full = fingertip_jacobian(model, &q, tip)?;
        let jac = DMatrix::from_fn(3, active.len(), |r, c| full[(r, active[c])]);
        let jjt = &jac * jac.transpose() + DMatrix::identity(3, 3) * lambda2;
        let Some(inv) = jjt.try_inverse() else {
            break;
        };
        let step: DVector<f64> = jac.transpose() * inv * DVector::from_column_slice(err.as_slice());
        for (c, &i) in active.iter().enumerate() {
            q[i] += step[c];
        }
        model.clamp_to_limits(&mut q);
        let next = (target - chain_tip(model, chain, &q)).norm();
        let stalled = next > residual - 1e-12;
        residual = next;
        if stalled {
            break;
        }
    }
    Ok(IkSolution { q, residual })
}
