use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{GaussianBasis, DEFAULT_BASIS_COUNT};
use crate::controller::{
    AdaptationGains, AdaptiveController, AdaptiveParams, Controller, ControllerKind, ImpedanceGains,
};
use crate::error::{Error, Result};
use crate::hand::{HandModel, Material, Mobility, Scene, SceneObject, Shape};
use crate::reference::{
    live_channel, load_trajectory, scripted_cap_reference, scripted_door_reference,
    scripted_grasp_reference, scripted_touch_reference, GraspTiming, LiveSender, ReferenceProvider,
    Script, TaskTiming, TeleopEmulation,
};

const BUILTIN: [(&str, &str); 4] = [
    (
        "touch_mouse",
        include_str!("../../data/scenarios/touch_mouse.toml"),
    ),
    (
        "grasp_ball",
        include_str!("../../data/scenarios/grasp_ball.toml"),
    ),
    (
        "open_door",
        include_str!("../../data/scenarios/open_door.toml"),
    ),
    (
        "turn_cap",
        include_str!("../../data/scenarios/turn_cap.toml"),
    ),
];

/// Names of the scenarios compiled into the library.
pub fn builtin_scenarios() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(name, _)| *name)
}

/// Source text of a compiled-in scenario.
pub fn builtin_scenario_text(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// A scalar applied to every joint, or one value per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDof {
    Scalar(f64),
    Values(Vec<f64>),
}

impl PerDof {
    pub fn expand(&self, dofs: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerDof::Scalar(x) => Ok(vec![*x; dofs]),
            PerDof::Values(v) if v.len() == dofs => Ok(v.clone()),
            PerDof::Values(v) => Err(Error::invalid(format!(
                "{what} has {} entries, model has {dofs} joints",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(rename = "type")]
    pub kind: ControllerKind,
    /// Sliding-error blend, 1/s.
    pub pi: f64,
    pub q_k: PerDof,
    pub q_d: PerDof,
    pub q_v: PerDof,
    #[serde(default = "ControllerConfig::default_ks_init")]
    pub ks_init: PerDof,
    #[serde(default = "ControllerConfig::default_kd_init")]
    pub kd_init: PerDof,
    #[serde(default)]
    pub gain_decay: f64,
    /// Gains of the fixed-gain baseline.
    pub fixed_ks: PerDof,
    pub fixed_kd: PerDof,
    /// Overrides for the hand model's position-mode gains.
    #[serde(default)]
    pub position_ks: Option<PerDof>,
    #[serde(default)]
    pub position_kd: Option<PerDof>,
}

impl ControllerConfig {
    fn default_ks_init() -> PerDof {
        PerDof::Scalar(1.0)
    }
    fn default_kd_init() -> PerDof {
        PerDof::Scalar(0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "BasisConfig::default_count")]
    pub n_basis: usize,
    /// Phase time constant `tau_s`, s.
    #[serde(default = "BasisConfig::default_tau")]
    pub phase_tau: f64,
    #[serde(default)]
    pub centers: Option<Vec<f64>>,
    #[serde(default)]
    pub widths: Option<Vec<f64>>,
}

impl BasisConfig {
    fn default_count() -> usize {
        DEFAULT_BASIS_COUNT
    }
    fn default_tau() -> f64 {
        1.0
    }
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            n_basis: DEFAULT_BASIS_COUNT,
            phase_tau: 1.0,
            centers: None,
            widths: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Grasp,
    Door,
    Cap,
    Touch,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grasp" => Ok(TaskKind::Grasp),
            "door" => Ok(TaskKind::Door),
            "cap" => Ok(TaskKind::Cap),
            "touch" => Ok(TaskKind::Touch),
            other => Err(Error::invalid(format!(
                "unknown task {other:?} (expected grasp, door, cap or touch)"
            ))),
        }
    }
}

impl TaskKind {
    /// Shipped scenario exercising this task.
    pub fn scenario_name(self) -> &'static str {
        match self {
            TaskKind::Grasp => "grasp_ball",
            TaskKind::Door => "open_door",
            TaskKind::Cap => "turn_cap",
            TaskKind::Touch => "touch_mouse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopConfig {
    /// Interval between pose updates, s.
    pub period: f64,
    /// Standard deviation of joint-angle noise, rad.
    #[serde(default)]
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Hold the model's rest pose.
    Rest,
    /// Recorded trajectory; relative paths resolve against the scenario file.
    File {
        path: PathBuf,
        #[serde(default)]
        teleop: Option<TeleopConfig>,
    },
    /// Scripted task motion generated from the named object's geometry.
    Task {
        task: TaskKind,
        object: String,
        #[serde(default)]
        timing: Option<TaskTiming>,
        #[serde(default)]
        grasp_timing: Option<GraspTiming>,
        /// How far inside the surface fingertips are commanded, m.
        #[serde(default)]
        depth: f64,
        /// Door handle travel, m.
        #[serde(default)]
        pull: f64,
        /// Cap sweep, rad.
        #[serde(default)]
        sweep: f64,
        #[serde(default)]
        teleop: Option<TeleopConfig>,
    },
    /// Commands arrive over the teleoperation channel.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SuccessConfig {
    /// A free object stays put once released.
    Grasp {
        object: String,
        /// Start of the evaluation window, s.
        window_start: f64,
        max_drop: f64,
        min_contacts: usize,
        #[serde(default = "default_sustain")]
        sustain_fraction: f64,
    },
    /// A single-axis object turns at least `target` radians.
    Articulation { object: String, target: f64 },
    /// Fingertips rest on the object without pressing too hard.
    Touch {
        object: String,
        window_start: f64,
        min_contacts: usize,
        force_ceiling: f64,
        #[serde(default = "default_sustain")]
        sustain_fraction: f64,
    },
}

fn default_sustain() -> f64 {
    0.9
}

impl SuccessConfig {
    pub fn object(&self) -> &str {
        match self {
            SuccessConfig::Grasp { object, .. }
            | SuccessConfig::Articulation { object, .. }
            | SuccessConfig::Touch { object, .. } => object,
        }
    }
}

/// Per-seed randomisation of object poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Half-width of the uniform offset per axis, m.
    pub position: f64,
    /// Half-width of the uniform yaw, rad.
    pub yaw: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            position: 0.005,
            yaw: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectEntry {
    id: String,
    shape: Shape,
    #[serde(default)]
    position: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    #[serde(default = "fixed")]
    mobility: Mobility,
    #[serde(default)]
    material: Material,
}

fn fixed() -> Mobility {
    Mobility::Fixed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    duration: f64,
    #[serde(default = "Header::default_sim_dt")]
    sim_dt: f64,
    #[serde(default = "Header::default_ctrl_dt")]
    ctrl_dt: f64,
    #[serde(default)]
    seed: u64,
    /// `hand24` or a path to a model file.
    #[serde(default = "Header::default_model")]
    model: String,
}

impl Header {
    fn default_sim_dt() -> f64 {
        0.001
    }
    fn default_ctrl_dt() -> f64 {
        0.01
    }
    fn default_model() -> String {
        "hand24".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Header,
    #[serde(default)]
    objects: Vec<ObjectEntry>,
    reference: ReferenceConfig,
    controller: ControllerConfig,
    #[serde(default)]
    basis: BasisConfig,
    success: SuccessConfig,
    #[serde(default)]
    perturbation: Perturbation,
    /// Constant extra joint torque, N m.
    #[serde(default)]
    external_torque: Option<PerDof>,
}

/// A complete, validated task definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub sim_dt: f64,
    pub ctrl_dt: f64,
    pub seed: u64,
    pub model: HandModel,
    /// Objects at their nominal poses.
    pub objects: Vec<SceneObject>,
    pub reference: ReferenceConfig,
    pub controller: ControllerConfig,
    pub basis: BasisConfig,
    pub success: SuccessConfig,
    pub perturbation: Perturbation,
    pub external_torque: Vec<f64>,
    /// Directory relative paths resolve against.
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    /// Parses scenario text. `base_dir` anchors relative paths inside it.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        let h = file.scenario;
        let model = if h.model == "hand24" {
            HandModel::hand24()
        } else {
            let p = resolve(base_dir, Path::new(&h.model));
            HandModel::load(&p)?
        };
        let objects = file
            .objects
            .into_iter()
            .map(|o| SceneObject::at(o.id, o.shape, o.position, o.rpy, o.mobility, o.material))
            .collect::<Result<Vec<_>>>()?;
        let external_torque = match &file.external_torque {
            Some(t) => t.expand(model.dofs(), "external_torque")?,
            None => Vec::new(),
        };
        let scenario = Scenario {
            name: h.name,
            duration: h.duration,
            sim_dt: h.sim_dt,
            ctrl_dt: h.ctrl_dt,
            seed: h.seed,
            model,
            objects,
            reference: file.reference,
            controller: file.controller,
            basis: file.basis,
            success: file.success,
            perturbation: file.perturbation,
            external_torque,
            base_dir: base_dir.map(Path::to_path_buf),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent()).map_err(|e| e.at(path))
    }

    /// One of the shipped scenarios by name.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin_scenario_text(name).ok_or_else(|| {
            Error::invalid(format!(
                "no built-in scenario {name:?} (have {})",
                builtin_scenarios().collect::<Vec<_>>().join(", ")
            ))
        })?;
        Self::from_toml_str(text, None)
    }

    /// A file path if one exists there, otherwise a built-in name.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            Self::load(path)
        } else if builtin_scenario_text(spec).is_some() {
            Self::builtin(spec)
        } else {
            Self::load(path)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid(format!(
                "duration must be >= 0, got {}",
                self.duration
            )));
        }
        if !(self.sim_dt > 0.0) || !(self.ctrl_dt > 0.0) {
            return Err(Error::invalid("sim_dt and ctrl_dt must be positive"));
        }
        let ratio = self.ctrl_dt / self.sim_dt;
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "ctrl_dt {} is not an integer multiple of sim_dt {}",
                self.ctrl_dt, self.sim_dt
            )));
        }
        if !(self.controller.pi > 0.0) {
            return Err(Error::invalid("controller pi must be positive"));
        }
        if self.basis.n_basis == 0 {
            return Err(Error::invalid("n_basis must be at least 1"));
        }
        let ids: Vec<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(Error::invalid(format!("duplicate object id {id}")));
            }
        }
        if self.object_index(self.success.object()).is_none() {
            return Err(Error::invalid(format!(
                "success criterion names unknown object {}",
                self.success.object()
            )));
        }
        if let ReferenceConfig::Task { object, .. } = &self.reference {
            if self.object_index(object).is_none() {
                return Err(Error::invalid(format!(
                    "reference names unknown object {object}"
                )));
            }
        }
        // Shapes of the controller blocks.
        let n = self.model.dofs();
        let c = &self.controller;
        for (v, what) in [
            (&c.q_k, "q_k"),
            (&c.q_d, "q_d"),
            (&c.q_v, "q_v"),
            (&c.ks_init, "ks_init"),
            (&c.kd_init, "kd_init"),
            (&c.fixed_ks, "fixed_ks"),
            (&c.fixed_kd, "fixed_kd"),
        ] {
            v.expand(n, what)?;
        }
        Ok(())
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Control ticks in a run.
    pub fn ticks(&self) -> usize {
        (self.duration / self.ctrl_dt + 1e-9).floor() as usize
    }

    /// Physics steps per control tick.
    pub fn substeps(&self) -> usize {
        (self.ctrl_dt / self.sim_dt).round() as usize
    }

    /// Copy with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.seed = seed;
        s
    }

    /// Scene for this seed: every non-plane object gets a uniform pose offset.
    pub fn build_scene(&self) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let p = self.perturbation;
        let objects = self
            .objects
            .iter()
            .map(|o| {
                if matches!(o.shape, Shape::Plane) || (p.position == 0.0 && p.yaw == 0.0) {
                    return o.clone();
                }
                let mut draw = |half: f64| {
                    if half > 0.0 {
                        rng.random_range(-half..=half)
                    } else {
                        0.0
                    }
                };
                let shift = Vector3::new(draw(p.position), draw(p.position), draw(p.position));
                let yaw = draw(p.yaw);
                o.perturbed(shift, yaw)
            })
            .collect();
        Scene {
            objects,
            external_torque: self.external_torque.clone(),
        }
    }

    /// Reference for this scenario. Task motions are planned on nominal object poses.
    pub fn build_reference(&self) -> Result<ReferenceProvider> {
        let model = &self.model;
        let (provider, teleop) = match &self.reference {
            ReferenceConfig::Rest => (
                ReferenceProvider::Scripted(Script::Constant(model.rest_pose())),
                None,
            ),
            ReferenceConfig::File { path, teleop } => {
                let p = resolve(self.base_dir.as_deref(), path);
                (
                    ReferenceProvider::File(load_trajectory(&p, model)?),
                    teleop.clone(),
                )
            }
            ReferenceConfig::Live => {
                return Err(Error::invalid(
                    "live references are created with build_live_reference",
                ))
            }
            ReferenceConfig::Task {
                task,
                object,
                timing,
                grasp_timing,
                depth,
                pull,
                sweep,
                teleop,
            } => {
                let obj = &self.objects[self.object_index(object).expect("validated")];
                let need = |t: &Option<TaskTiming>| {
                    t.ok_or_else(|| {
                        Error::invalid(format!("{task:?} reference needs [reference.timing]"))
                    })
                };
                let provider = match task {
                    TaskKind::Grasp => {
                        let timing = grasp_timing.ok_or_else(|| {
                            Error::invalid("grasp reference needs [reference.grasp_timing]")
                        })?;
                        scripted_grasp_reference(model, obj, timing, *depth)?
                    }
                    TaskKind::Door => scripted_door_reference(model, obj, need(timing)?, *pull)?,
                    TaskKind::Cap => {
                        scripted_cap_reference(model, obj, need(timing)?, *depth, *sweep)?
                    }
                    TaskKind::Touch => scripted_touch_reference(model, obj, need(timing)?, *depth)?,
                };
                (provider, teleop.clone())
            }
        };
        match teleop {
            Some(t) => provider.with_teleop(TeleopEmulation {
                period: t.period,
                noise_std: t.noise_std,
                seed: self.seed,
                limits: model.limits(),
            }),
            None => Ok(provider),
        }
    }

    /// Reference fed by a live channel, plus the sender half.
    pub fn build_live_reference(&self) -> (LiveSender, ReferenceProvider) {
        let (tx, rx) = live_channel(&self.model);
        (tx, ReferenceProvider::Live(rx))
    }

    pub fn build_basis(&self) -> Result<GaussianBasis> {
        let b = &self.basis;
        match (&b.centers, &b.widths) {
            (Some(c), Some(w)) => GaussianBasis::new(c.clone(), w.clone(), 1.0),
            (None, None) => {
                let span = if self.duration > 0.0 {
                    self.duration
                } else {
                    1.0
                };
                GaussianBasis::time_uniform(b.n_basis, span, b.phase_tau, 1.0)
            }
            _ => Err(Error::invalid(
                "basis centers and widths must be given together",
            )),
        }
    }

    /// Controller of the given kind configured from the scenario.
    pub fn build_controller(&self, kind: ControllerKind) -> Result<Controller> {
        let n = self.model.dofs();
        let c = &self.controller;
        let tau_max = self.model.tau_max();
        Ok(match kind {
            ControllerKind::Adaptive => {
                let basis = self.build_basis()?;
                let params = AdaptiveParams::initial_per_joint(
                    &c.ks_init.expand(n, "ks_init")?,
                    &c.kd_init.expand(n, "kd_init")?,
                    basis.len(),
                )?;
                let gains = AdaptationGains::new(
                    c.q_k.expand(n, "q_k")?,
                    c.q_d.expand(n, "q_d")?,
                    c.q_v.expand(n, "q_v")?,
                    c.pi,
                )?;
                Controller::Adaptive(
                    AdaptiveController::new(basis, self.basis.phase_tau, params, gains, tau_max)?
                        .with_gain_decay(c.gain_decay),
                )
            }
            ControllerKind::Fixed => Controller::Fixed {
                gains: ImpedanceGains {
                    ks: c.fixed_ks.expand(n, "fixed_ks")?,
                    kd: c.fixed_kd.expand(n, "fixed_kd")?,
                },
                tau_max,
                pi: c.pi,
            },
            ControllerKind::Position => {
                let mut gains = self.model.position_gains();
                if let Some(ks) = &c.position_ks {
                    gains.ks = ks.expand(n, "position_ks")?;
                }
                if let Some(kd) = &c.position_kd {
                    gains.kd = kd.expand(n, "position_kd")?;
                }
                Controller::Position {
                    gains,
                    tau_max,
                    pi: c.pi,
                }
            }
        })
    }
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
name = "tiny"
duration = 0.5

[[objects]]
id = "block"
position = [0.15, 0.0, -0.05]
shape = { type = "box", half_extents = [0.02, 0.02, 0.02] }

[reference]
source = "rest"

[controller]
type = "fixed"
pi = 10.0
q_k = 1.0
q_d = 1.0
q_v = 1.0
fixed_ks = 5.0
fixed_kd = 0.1

[success]
kind = "articulation"
object = "block"
target = 0.0
"#;

    #[test]
    fn builtins_parse_and_build() {
        let names: Vec<_> = builtin_scenarios().collect();
        assert_eq!(names.len(), 4);
        for name in names {
            let s = Scenario::builtin(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.substeps(), 10);
            assert!(s.ticks() > 0);
            s.build_reference().unwrap();
            for kind in ControllerKind::ALL {
                assert_eq!(s.build_controller(kind).unwrap().kind(), kind);
            }
            assert_eq!(s.build_scene().objects.len(), s.objects.len());
        }
        assert!(Scenario::builtin("juggle").is_err());
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let s = Scenario::from_toml_str(MINIMAL, None).unwrap();
        assert_eq!((s.sim_dt, s.ctrl_dt, s.seed), (0.001, 0.01, 0));
        assert_eq!(s.ticks(), 50);
        assert_eq!(s.basis.n_basis, 10);
        assert_eq!(s.perturbation, Perturbation::default());
        assert_eq!(s.controller.kind, ControllerKind::Fixed);
    }

    fn rejects(edit: impl Fn(&str) -> String) -> Error {
        Scenario::from_toml_str(&edit(MINIMAL), None).unwrap_err()
    }

    #[test]
    fn bad_files_are_rejected() {
        // Control period not a whole number of physics steps.
        rejects(|t| {
            t.replace(
                "duration = 0.5",
                "duration = 0.5\nctrl_dt = 0.0025\nsim_dt = 0.001",
            )
        });
        // Per-joint gains of the wrong length.
        rejects(|t| t.replace("fixed_ks = 5.0", "fixed_ks = [5.0, 5.0]"));
        rejects(|t| t.replace("q_k = 1.0", "q_k = [1.0]"));
        // Unknown keys and unknown objects.
        rejects(|t| t.replace("pi = 10.0", "pi = 10.0\nmystery = 1"));
        rejects(|t| t.replace("object = \"block\"", "object = \"lamp\""));
        rejects(|t| {
            format!("{t}\n[[objects]]\nid = \"block\"\nshape = {{ type = \"sphere\", radius = 0.01 }}\n")
        });
        // Degenerate shapes.
        rejects(|t| {
            t.replace(
                "half_extents = [0.02, 0.02, 0.02]",
                "half_extents = [0.02, 0.0, 0.02]",
            )
        });
        // Not TOML at all.
        assert!(matches!(
            Scenario::from_toml_str("[scenario", None),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn perturbation_depends_only_on_seed() {
        let s = Scenario::builtin("grasp_ball").unwrap();
        let pos = |seed| {
            s.with_seed(seed).build_scene().objects[0]
                .pose
                .translation
                .vector
        };
        assert_eq!(pos(3), pos(3));
        assert_ne!(pos(3), pos(4));
        let nominal = s.objects[0].pose.translation.vector;
        for seed in 0..20 {
            let d = pos(seed) - nominal;
            assert!(d.amax() <= s.perturbation.position + 1e-12);
        }
    }

    #[test]
    fn per_dof_expansion() {
        assert_eq!(PerDof::Scalar(2.0).expand(3, "x").unwrap(), vec![2.0; 3]);
        assert_eq!(
            PerDof::Values(vec![1.0, 2.0]).expand(2, "x").unwrap(),
            vec![1.0, 2.0]
        );
        assert!(PerDof::Values(vec![1.0]).expand(2, "x").is_err());
    }

    #[test]
    fn resolve_prefers_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let s = Scenario::resolve(path.to_str().unwrap()).unwrap();
        assert_eq!(s.name, "tiny");
        assert_eq!(s.base_dir.as_deref(), Some(dir.path()));
        assert_eq!(
            Scenario::resolve("touch_mouse").unwrap().name,
            "touch_mouse"
        );
        assert!(matches!(
            Scenario::resolve("/no/such/scenario.toml"),
            Err(Error::Io { .. })
        ));
    }
}
