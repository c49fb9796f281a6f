//! Articulated hand: model description, kinematics, scene objects, penalty
//! contact and decoupled joint-space dynamics.

mod contact;
mod dynamics;
mod kinematics;
mod scene;

pub use contact::{detect_contacts, ContactEvent, ContactFrame};
pub use dynamics::{step_dynamics, JointState, StepResult};
pub use kinematics::{
    fingertip_jacobian, fingertip_position, forward_kinematics, gravity_torques,
    solve_fingertip_ik, IkOptions, IkSolution, Kinematics,
};
pub use scene::{
    Material, Mobility, ObjectState, Primitive, Scene, SceneObject, SceneState, Shape,
};

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::ImpedanceGains;
use crate::error::{Error, Result};

/// Shipped 24-DOF hand description.
pub const HAND24_MODEL: &str = include_str!("../../data/hand24.model");

/// One revolute joint and where it sits on its parent link.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    /// Parent joint (whose link this joint is mounted on); `None` for the base.
    pub parent: Option<usize>,
    /// Mount point in the parent joint's frame.
    pub origin: Vector3<f64>,
    /// Fixed roll/pitch/yaw applied before the joint rotation.
    pub rpy: Vector3<f64>,
    pub axis: Unit<Vector3<f64>>,
    pub limit_lo: f64,
    pub limit_hi: f64,
    /// Effective inertia about the axis, kg m^2 (includes reflected actuator inertia).
    pub inertia: f64,
    /// Viscous joint damping, N m s/rad.
    pub damping: f64,
    pub tau_max: f64,
    pub rest: f64,
}

/// The rigid link driven by the joint with the same index.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    /// Extent along the joint frame's x axis.
    pub length: f64,
    pub mass: f64,
    /// Centre of mass in the joint frame.
    pub com: Vector3<f64>,
    /// Zero for links that carry no fingertip.
    pub fingertip_radius: f64,
    pub fingertip: Option<String>,
}

/// A contact sphere at the end of a terminal link.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingertip {
    pub name: String,
    pub link: usize,
    pub radius: f64,
    /// Joints from the base to the fingertip link.
    pub chain: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionModeGains {
    pub ks: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkSpec>,
    pub gravity: Vector3<f64>,
    pub position_mode_gains: PositionModeGains,
    order: Vec<usize>,
    fingertips: Vec<Fingertip>,
    subtrees: Vec<Vec<usize>>,
}

impl HandModel {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        links: Vec<LinkSpec>,
        gravity: Vector3<f64>,
        position_mode_gains: PositionModeGains,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("hand model needs at least one joint"));
        }
        if joints.len() != links.len() {
            return Err(Error::invalid(format!(
                "{} joints but {} links",
                joints.len(),
                links.len()
            )));
        }
        for j in &joints {
            if !(j.limit_lo < j.limit_hi) {
                return Err(Error::invalid(format!(
                    "joint {}: limit_lo {} must be below limit_hi {}",
                    j.name, j.limit_lo, j.limit_hi
                )));
            }
            if !(j.inertia > 0.0) || !(j.tau_max > 0.0) || !(j.damping >= 0.0) {
                return Err(Error::invalid(format!(
                    "joint {}: inertia and tau_max must be positive, damping non-negative",
                    j.name
                )));
            }
            if let Some(p) = j.parent {
                if p >= joints.len() {
                    return Err(Error::invalid(format!(
                        "joint {}: parent {p} out of range",
                        j.name
                    )));
                }
            }
        }
        for (i, l) in links.iter().enumerate() {
            if !(l.length >= 0.0) || !(l.mass >= 0.0) || !(l.fingertip_radius >= 0.0) {
                return Err(Error::invalid(format!(
                    "link {i}: length, mass and radius must be non-negative"
                )));
            }
        }
        let order = topological_order(&joints)?;

        let n = joints.len();
        let mut children = vec![Vec::new(); n];
        for (i, j) in joints.iter().enumerate() {
            if let Some(p) = j.parent {
                children[p].push(i);
            }
        }
        let chain_of = |leaf: usize| {
            let mut chain = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = joints[cur].parent {
                chain.push(p);
                cur = p;
            }
            chain.reverse();
            chain
        };
        let fingertips = (0..n)
            .filter(|&i| children[i].is_empty() && links[i].fingertip_radius > 0.0)
            .map(|i| Fingertip {
                name: links[i]
                    .fingertip
                    .clone()
                    .unwrap_or_else(|| joints[i].name.clone()),
                link: i,
                radius: links[i].fingertip_radius,
                chain: chain_of(i),
            })
            .collect();
        let mut subtrees = vec![Vec::new(); n];
        for i in 0..n {
            for a in chain_of(i) {
                subtrees[a].push(i);
            }
        }

        Ok(Self {
            name: name.into(),
            joints,
            links,
            gravity,
            position_mode_gains,
            order,
            fingertips,
            subtrees,
        })
    }

    /// The shipped 24-DOF layout.
    pub fn hand24() -> Self {
        Self::from_toml_str(HAND24_MODEL).expect("shipped hand model is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile =
            toml::from_str(text).map_err(|e| Error::format(format!("hand model: {e}")))?;
        file.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.at(path))
    }

    pub fn to_toml_string(&self) -> String {
        let file = ModelFile::from_model(self);
        toml::to_string(&file).expect("model serializes")
    }

    /// Number of actuated joints.
    pub fn dofs(&self) -> usize {
        self.joints.len()
    }

    /// Joints ordered so that parents precede children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn fingertips(&self) -> &[Fingertip] {
        &self.fingertips
    }

    pub fn fingertip_index(&self, name: &str) -> Option<usize> {
        self.fingertips.iter().position(|f| f.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Joints whose motion moves link `i` (including `i`).
    pub(crate) fn subtree(&self, i: usize) -> &[usize] {
        &self.subtrees[i]
    }

    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.joints
            .iter()
            .map(|j| (j.limit_lo, j.limit_hi))
            .collect()
    }

    pub fn tau_max(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.tau_max).collect()
    }

    pub fn inertia(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.inertia).collect()
    }

    pub fn rest_pose(&self) -> Vec<f64> {
        self.joints
            .iter()
            .map(|j| j.rest.clamp(j.limit_lo, j.limit_hi))
            .collect()
    }

    pub fn clamp_to_limits(&self, q: &mut [f64]) -> usize {
        let mut clamped = 0;
        for (x, j) in q.iter_mut().zip(&self.joints) {
            let c = x.clamp(j.limit_lo, j.limit_hi);
            if c != *x {
                clamped += 1;
                *x = c;
            }
        }
        clamped
    }

    pub fn position_gains(&self) -> ImpedanceGains {
        ImpedanceGains::uniform(
            self.dofs(),
            self.position_mode_gains.ks,
            self.position_mode_gains.kd,
        )
    }

    /// A single revolute joint about z with a link of `length` and a fingertip.
    pub fn single_joint(length: f64, inertia: f64, damping: f64, tau_max: f64) -> Self {
        let joint = JointSpec {
            name: "J0".into(),
            parent: None,
            origin: Vector3::zeros(),
            rpy: Vector3::zeros(),
            axis: Vector3::z_axis(),
            limit_lo: -std::f64::consts::PI,
            limit_hi: std::f64::consts::PI,
            inertia,
            damping,
            tau_max,
            rest: 0.0,
        };
        let link = LinkSpec {
            length,
            mass: 0.0,
            com: Vector3::new(length / 2.0, 0.0, 0.0),
            fingertip_radius: 0.01,
            fingertip: Some("tip".into()),
        };
        Self::new(
            "single",
            vec![joint],
            vec![link],
            Vector3::zeros(),
            PositionModeGains { ks: 30.0, kd: 0.05 },
        )
        .expect("single-joint model is valid")
    }
}

fn topological_order(joints: &[JointSpec]) -> Result<Vec<usize>> {
    let n = joints.len();
    let mut depth = vec![usize::MAX; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        while depth[cur] == usize::MAX {
            if path.contains(&cur) || path.len() > n {
                return Err(Error::invalid(format!(
                    "joint {} is part of a parent cycle",
                    joints[start].name
                )));
            }
            path.push(cur);
            match joints[cur].parent {
                Some(p) => cur = p,
                None => {
                    depth[cur] = 0;
                    path.pop();
                    break;
                }
            }
        }
        while let Some(j) = path.pop() {
            depth[j] = depth[joints[j].parent.expect("non-root")] + 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (depth[i], i));
    Ok(order)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    gravity: [f64; 3],
    position_mode_gains: PositionModeGains,
    joints: Vec<JointEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<[f64; 3]>,
    #[serde(default)]
    rpy: [f64; 3],
    axis: [f64; 3],
    limits: [f64; 2],
    inertia: f64,
    damping: f64,
    tau_max: f64,
    #[serde(default)]
    rest: f64,
    link: LinkEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    length: f64,
    #[serde(default)]
    mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    com: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fingertip: Option<String>,
    #[serde(default)]
    radius: f64,
}

impl ModelFile {
    fn build(self) -> Result<HandModel> {
        let index: HashMap<&str, usize> = self
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| (j.name.as_str(), i))
            .collect();
        if index.len() != self.joints.len() {
            return Err(Error::format("hand model: duplicate joint names"));
        }
        let mut joints = Vec::with_capacity(self.joints.len());
        let mut links = Vec::with_capacity(self.joints.len());
        for entry in &self.joints {
            let parent = match &entry.parent {
                None => None,
                Some(p) => Some(*index.get(p.as_str()).ok_or_else(|| {
                    Error::format(format!("joint {}: unknown parent {p:?}", entry.name))
                })?),
            };
            let origin = match (entry.origin, parent) {
                (Some(o), _) => Vector3::from(o),
                (None, Some(p)) => Vector3::new(self.joints[p].link.length, 0.0, 0.0),
                (None, None) => Vector3::zeros(),
            };
            let axis = Vector3::from(entry.axis);
            if axis.norm() < 1e-12 {
                return Err(Error::format(format!("joint {}: zero axis", entry.name)));
            }
            joints.push(JointSpec {
                name: entry.name.clone(),
                parent,
                origin,
                rpy: Vector3::from(entry.rpy),
                axis: Unit::new_normalize(axis),
                limit_lo: entry.limits[0],
                limit_hi: entry.limits[1],
                inertia: entry.inertia,
                damping: entry.damping,
                tau_max: entry.tau_max,
                rest: entry.rest,
            });
            let l = &entry.link;
            links.push(LinkSpec {
                length: l.length,
                mass: l.mass,
                com: l
                    .com
                    .map(Vector3::from)
                    .unwrap_or_else(|| Vector3::new(l.length / 2.0, 0.0, 0.0)),
                fingertip_radius: l.radius,
                fingertip: l.fingertip.clone(),
            });
        }
        HandModel::new(
            self.name,
            joints,
            links,
            Vector3::from(self.gravity),
            self.position_mode_gains,
        )
        .map_err(|e| match e {
            Error::InvalidArgument(m) => Error::format(format!("hand model: {m}")),
            other => other,
        })
    }

    fn from_model(model: &HandModel) -> Self {
        let joints = model
            .joints
            .iter()
            .zip(&model.links)
            .map(|(j, l)| JointEntry {
                name: j.name.clone(),
                parent: j.parent.map(|p| model.joints[p].name.clone()),
                origin: Some(j.origin.into()),
                rpy: j.rpy.into(),
                axis: j.axis.into_inner().into(),
                limits: [j.limit_lo, j.limit_hi],
                inertia: j.inertia,
                damping: j.damping,
                tau_max: j.tau_max,
                rest: j.rest,
                link: LinkEntry {
                    length: l.length,
                    mass: l.mass,
                    com: Some(l.com.into()),
                    fingertip: l.fingertip.clone(),
                    radius: l.fingertip_radius,
                },
            })
            .collect();
        ModelFile {
            name: model.name.clone(),
            gravity: model.gravity.into(),
            position_mode_gains: model.position_mode_gains,
            joints,
        }
    }
}
