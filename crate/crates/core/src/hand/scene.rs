use std::collections::BTreeMap;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convex primitive in its own frame; cylinders run along local z and the
/// plane is `z = 0` with normal `+z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere { radius: f64 },
    Box { half_extents: Vector3<f64> },
    Cylinder { radius: f64, half_length: f64 },
    Plane,
}

impl Primitive {
    /// Signed distance from `p` to the surface and the outward unit normal.
    pub fn signed_distance(&self, p: &Point3<f64>) -> (f64, Vector3<f64>) {
        match *self {
            Primitive::Sphere { radius } => {
                let r = p.coords.norm();
                let n = if r > 0.0 { p.coords / r } else { Vector3::z() };
                (r - radius, n)
            }
            Primitive::Box { half_extents } => box_distance(p, &half_extents),
            Primitive::Cylinder {
                radius,
                half_length,
            } => cylinder_distance(p, radius, half_length),
            Primitive::Plane => (p.z, Vector3::z()),
        }
    }
}

fn box_distance(p: &Point3<f64>, h: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let q = p.coords.abs() - h;
    if q.max() > 0.0 {
        let closest = Vector3::new(
            p.x.clamp(-h.x, h.x),
            p.y.clamp(-h.y, h.y),
            p.z.clamp(-h.z, h.z),
        );
        let d = p.coords - closest;
        let dist = d.norm();
        (dist, d / dist)
    } else {
        // Inside: push out through the nearest face.
        let axis = q.imax();
        let mut n = Vector3::zeros();
        n[axis] = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
        (q[axis], n)
    }
}

fn cylinder_distance(p: &Point3<f64>, radius: f64, half_length: f64) -> (f64, Vector3<f64>) {
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let radial = if rho > 0.0 {
        Vector3::new(p.x / rho, p.y / rho, 0.0)
    } else {
        Vector3::x()
    };
    let axial = Vector3::new(0.0, 0.0, if p.z >= 0.0 { 1.0 } else { -1.0 });
    let dr = rho - radius;
    let dz = p.z.abs() - half_length;
    match (dr > 0.0, dz > 0.0) {
        (true, true) => {
            let dist = (dr * dr + dz * dz).sqrt();
            (dist, (radial * dr + axial * dz) / dist)
        }
        (true, false) => (dr, radial),
        (false, true) => (dz, axial),
        (false, false) if dr > dz => (dr, radial),
        (false, false) => (dz, axial),
    }
}

fn pose_from(position: [f64; 3], rpy: [f64; 3]) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(position[0], position[1], position[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    )
}

/// Object geometry as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    Box {
        half_extents: [f64; 3],
    },
    Cylinder {
        radius: f64,
        half_length: f64,
    },
    Plane,
    /// A door leaf with a bar handle. The hinge is the object's local z axis.
    HingedPanel {
        panel_center: [f64; 3],
        panel_half_extents: [f64; 3],
        handle_center: [f64; 3],
        handle_axis: [f64; 3],
        handle_radius: f64,
        handle_half_length: f64,
    },
    /// A cap turning about its own axis (local z).
    CappedRotor {
        radius: f64,
        half_length: f64,
    },
    /// A box with a spherical dome rising `cap_height` above its top face
    /// (a computer mouse).
    CappedBox {
        half_extents: [f64; 3],
        cap_radius: f64,
        cap_height: f64,
    },
}

impl Shape {
    /// Primitives making up the shape, posed in the object frame.
    pub fn parts(&self) -> Vec<(Isometry3<f64>, Primitive)> {
        let at = |p: [f64; 3]| Isometry3::translation(p[0], p[1], p[2]);
        match self {
            Shape::Sphere { radius } => {
                vec![(Isometry3::identity(), Primitive::Sphere { radius: *radius })]
            }
            Shape::Box { half_extents } => vec![(
                Isometry3::identity(),
                Primitive::Box {
                    half_extents: Vector3::from(*half_extents),
                },
            )],
            Shape::Cylinder {
                radius,
                half_length,
            }
            | Shape::CappedRotor {
                radius,
                half_length,
            } => vec![(
                Isometry3::identity(),
                Primitive::Cylinder {
                    radius: *radius,
                    half_length: *half_length,
                },
            )],
            Shape::Plane => vec![(Isometry3::identity(), Primitive::Plane)],
            Shape::HingedPanel {
                panel_center,
                panel_half_extents,
                handle_center,
                handle_axis,
                handle_radius,
                handle_half_length,
            } => {
                let axis = Vector3::from(*handle_axis);
                let rot =
                    UnitQuaternion::rotation_between(&Vector3::z(), &axis).unwrap_or_else(|| {
                        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
                    });
                vec![
                    (
                        at(*panel_center),
                        Primitive::Box {
                            half_extents: Vector3::from(*panel_half_extents),
                        },
                    ),
                    (
                        Isometry3::from_parts(
                            Translation3::from(Vector3::from(*handle_center)),
                            rot,
                        ),
                        Primitive::Cylinder {
                            radius: *handle_radius,
                            half_length: *handle_half_length,
                        },
                    ),
                ]
            }
            Shape::CappedBox {
                half_extents,
                cap_radius,
                cap_height,
            } => vec![
                (
                    Isometry3::identity(),
                    Primitive::Box {
                        half_extents: Vector3::from(*half_extents),
                    },
                ),
                (
                    at([0.0, 0.0, half_extents[2] + cap_height - cap_radius]),
                    Primitive::Sphere {
                        radius: *cap_radius,
                    },
                ),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {x}")))
            }
        };
        match self {
            Shape::Sphere { radius } => positive("radius", *radius),
            Shape::Box { half_extents } => half_extents
                .iter()
                .try_for_each(|h| positive("half extent", *h)),
            Shape::Cylinder {
                radius,
                half_length,
            }
            | Shape::CappedRotor {
                radius,
                half_length,
            } => positive("radius", *radius).and(positive("half length", *half_length)),
            Shape::Plane => Ok(()),
            Shape::HingedPanel {
                panel_half_extents,
                handle_axis,
                handle_radius,
                handle_half_length,
                ..
            } => {
                panel_half_extents
                    .iter()
                    .try_for_each(|h| positive("panel half extent", *h))?;
                positive("handle radius", *handle_radius)?;
                positive("handle half length", *handle_half_length)?;
                positive("handle axis norm", Vector3::from(*handle_axis).norm())
            }
            Shape::CappedBox {
                half_extents,
                cap_radius,
                cap_height,
            } => {
                half_extents
                    .iter()
                    .try_for_each(|h| positive("half extent", *h))?;
                positive("cap radius", *cap_radius)?;
                positive("cap height", *cap_height)?;
                if cap_height > cap_radius {
                    return Err(Error::invalid(format!(
                        "cap height {cap_height} exceeds cap radius {cap_radius}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// How an object may move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mobility {
    Fixed,
    /// Translating rigid body. It is held in place until `release_at`.
    Free {
        mass: f64,
        #[serde(default)]
        release_at: f64,
    },
    /// Hinge or rotor about the object's local z axis.
    SingleAxis {
        inertia: f64,
        #[serde(default)]
        viscous: f64,
        #[serde(default)]
        coulomb: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range: Option<[f64; 2]>,
    },
}

/// Penalty-contact parameters of an object surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Normal stiffness `k_c`, N/m (also used tangentially for stiction).
    #[serde(default = "Material::default_stiffness")]
    pub stiffness: f64,
    /// Normal damping `b_c`, N s/m, active only while penetration grows.
    #[serde(default = "Material::default_damping")]
    pub damping: f64,
    /// Coulomb coefficient.
    #[serde(default = "Material::default_friction")]
    pub friction: f64,
}

impl Material {
    fn default_stiffness() -> f64 {
        5000.0
    }
    fn default_damping() -> f64 {
        50.0
    }
    fn default_friction() -> f64 {
        0.8
    }
}

impl Default for Material {
    fn default() -> Self {
        Self {
            stiffness: Self::default_stiffness(),
            damping: Self::default_damping(),
            friction: Self::default_friction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Isometry3<f64>,
    pub mobility: Mobility,
    pub material: Material,
    parts: Vec<(Isometry3<f64>, Primitive)>,
}

impl SceneObject {
    pub fn new(
        id: impl Into<String>,
        shape: Shape,
        pose: Isometry3<f64>,
        mobility: Mobility,
        material: Material,
    ) -> Result<Self> {
        let id = id.into();
        shape
            .validate()
            .map_err(|e| Error::invalid(format!("object {id}: {e}")))?;
        if !(material.stiffness > 0.0) || !(material.damping >= 0.0) || !(material.friction >= 0.0)
        {
            return Err(Error::invalid(format!(
                "object {id}: need stiffness > 0, damping >= 0, friction >= 0"
            )));
        }
        match mobility {
            Mobility::Free { mass, .. } if !(mass > 0.0) => {
                return Err(Error::invalid(format!(
                    "object {id}: mass must be positive"
                )))
            }
            Mobility::SingleAxis {
                inertia,
                viscous,
                coulomb,
                range,
            } => {
                if !(inertia > 0.0) || !(viscous >= 0.0) || !(coulomb >= 0.0) {
                    return Err(Error::invalid(format!(
                        "object {id}: need inertia > 0 and non-negative friction"
                    )));
                }
                if let Some([lo, hi]) = range {
                    if !(lo < hi) {
                        return Err(Error::invalid(format!("object {id}: empty range")));
                    }
                }
            }
            _ => {}
        }
        let parts = shape.parts();
        Ok(Self {
            id,
            shape,
            pose,
            mobility,
            material,
            parts,
        })
    }

    /// Builds from position and roll/pitch/yaw.
    pub fn at(
        id: impl Into<String>,
        shape: Shape,
        position: [f64; 3],
        rpy: [f64; 3],
        mobility: Mobility,
        material: Material,
    ) -> Result<Self> {
        Self::new(id, shape, pose_from(position, rpy), mobility, material)
    }

    /// Current object frame in the world.
    pub fn transform(&self, state: &ObjectState) -> Isometry3<f64> {
        match self.mobility {
            Mobility::Fixed => self.pose,
            Mobility::Free { .. } => Translation3::from(state.offset) * self.pose,
            Mobility::SingleAxis { .. } => {
                self.pose * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), state.angle)
            }
        }
    }

    /// World axis and pivot of a single-axis object.
    pub fn axis(&self) -> Option<(Point3<f64>, Vector3<f64>)> {
        match self.mobility {
            Mobility::SingleAxis { .. } => Some((
                Point3::from(self.pose.translation.vector),
                self.pose.rotation * Vector3::z(),
            )),
            _ => None,
        }
    }

    /// Signed distance and outward normal, both in world coordinates.
    pub fn signed_distance(&self, state: &ObjectState, p: &Point3<f64>) -> (f64, Vector3<f64>) {
        let frame = self.transform(state);
        let local = frame.inverse_transform_point(p);
        let mut best = (f64::INFINITY, Vector3::z());
        for (part_pose, prim) in &self.parts {
            let (d, n) = prim.signed_distance(&part_pose.inverse_transform_point(&local));
            if d < best.0 {
                best = (d, part_pose.rotation * n);
            }
        }
        (best.0, frame.rotation * best.1)
    }

    /// Velocity of the material point at world position `p`.
    pub fn point_velocity(&self, state: &ObjectState, p: &Point3<f64>) -> Vector3<f64> {
        match self.mobility {
            Mobility::Fixed => Vector3::zeros(),
            Mobility::Free { .. } => state.velocity,
            Mobility::SingleAxis { .. } => {
                let (pivot, axis) = self.axis().expect("single-axis");
                (axis * state.rate).cross(&(p - pivot))
            }
        }
    }

    /// Scalar articulation coordinate: hinge angle for single-axis objects.
    pub fn articulation(&self, state: &ObjectState) -> f64 {
        match self.mobility {
            Mobility::SingleAxis { .. } => state.angle,
            Mobility::Free { .. } => state.offset.norm(),
            Mobility::Fixed => 0.0,
        }
    }

    /// Applies a pose perturbation (translation, then yaw about world z).
    pub fn perturbed(&self, shift: Vector3<f64>, yaw: f64) -> Self {
        let mut out = self.clone();
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
        out.pose = Isometry3::from_parts(
            Translation3::from(self.pose.translation.vector + shift),
            rot * self.pose.rotation,
        );
        out
    }
}

/// Dynamic state of one scene object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectState {
    /// Translation from the initial pose (free objects).
    pub offset: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Rotation about the axis (single-axis objects).
    pub angle: f64,
    pub rate: f64,
}

/// Objects and constant external joint loads. Immutable during a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    /// Extra torque on each joint (empty for none).
    pub external_torque: Vec<f64>,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>) -> Self {
        Self {
            objects,
            external_torque: Vec::new(),
        }
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn initial_state(&self) -> SceneState {
        SceneState {
            objects: vec![ObjectState::default(); self.objects.len()],
            anchors: BTreeMap::new(),
        }
    }
}

/// Everything about the scene that changes during a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneState {
    pub objects: Vec<ObjectState>,
    /// Stiction anchors per (fingertip, object), in object coordinates.
    pub anchors: BTreeMap<(usize, usize), Point3<f64>>,
}
