use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::metrics::{aggregate, success_check, MetricsRecord, StepTiming, TickRecord};
use crate::controller::{Controller, ControllerKind, StepOutput};
use crate::error::{Error, Result};
use crate::hand::{
    step_dynamics, ContactEvent, ContactFrame, HandModel, JointState, Scene, SceneState,
};
use crate::reference::{ReferenceProvider, ReferenceSample};

/// Per-tick controller internals for the profile log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub tick: usize,
    pub t: f64,
    pub ks: Vec<f64>,
    pub kd: Vec<f64>,
    pub v: Vec<f64>,
    pub e: Vec<f64>,
    pub eps: Vec<f64>,
    pub tau: Vec<f64>,
}

/// A closed-loop simulation advancing one control tick at a time.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: HandModel,
    pub scene: Scene,
    pub scene_state: SceneState,
    pub state: JointState,
    pub reference: ReferenceProvider,
    controller: Controller,
    initial_controller: Controller,
    sim_dt: f64,
    ctrl_dt: f64,
    substeps: usize,
    target: Option<usize>,
    tick: usize,
    in_contact: Vec<bool>,
    last_reference: Option<ReferenceSample>,
    last_output: Option<StepOutput>,
    last_contacts: ContactFrame,
    step_time_sum: f64,
    step_time_max: f64,
}

impl Simulation {
    /// Builds the loop for `scenario` with the given controller and reference.
    pub fn new(
        scenario: &Scenario,
        kind: ControllerKind,
        reference: ReferenceProvider,
    ) -> Result<Self> {
        let model = scenario.model.clone();
        let scene = scenario.build_scene();
        let controller = scenario.build_controller(kind)?;
        let tips = model.fingertips().len();
        Ok(Self {
            state: JointState::at_rest(model.rest_pose()),
            scene_state: scene.initial_state(),
            target: scene.object_index(scenario.success.object()),
            scene,
            reference,
            initial_controller: controller.clone(),
            controller,
            sim_dt: scenario.sim_dt,
            ctrl_dt: scenario.ctrl_dt,
            substeps: scenario.substeps(),
            tick: 0,
            in_contact: vec![false; tips],
            last_reference: None,
            last_output: None,
            last_contacts: ContactFrame::default(),
            step_time_sum: 0.0,
            step_time_max: 0.0,
            model,
        })
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn ticks_done(&self) -> usize {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn ctrl_dt(&self) -> f64 {
        self.ctrl_dt
    }

    pub fn last_reference(&self) -> Option<&ReferenceSample> {
        self.last_reference.as_ref()
    }

    pub fn last_output(&self) -> Option<&StepOutput> {
        self.last_output.as_ref()
    }

    /// Contacts at the last physics step of the most recent tick.
    pub fn last_contacts(&self) -> &ContactFrame {
        &self.last_contacts
    }

    pub fn step_timing(&self) -> StepTiming {
        StepTiming {
            ticks: self.tick,
            mean: if self.tick > 0 {
                self.step_time_sum / self.tick as f64
            } else {
                0.0
            },
            max: self.step_time_max,
        }
    }

    /// Swaps in a fresh controller of another kind, keeping the hand state.
    pub fn switch_controller(&mut self, kind: ControllerKind, scenario: &Scenario) -> Result<()> {
        self.controller = scenario.build_controller(kind)?;
        self.initial_controller = self.controller.clone();
        Ok(())
    }

    /// Returns hand, objects and controller to their initial state.
    pub fn reset(&mut self) {
        self.state = JointState::at_rest(self.model.rest_pose());
        self.scene_state = self.scene.initial_state();
        self.controller = self.initial_controller.clone();
        self.tick = 0;
        self.in_contact.fill(false);
        self.last_reference = None;
        self.last_output = None;
        self.last_contacts = ContactFrame::default();
        self.step_time_sum = 0.0;
        self.step_time_max = 0.0;
    }

    /// Samples the reference, runs the controller, then integrates `ctrl_dt`
    /// worth of physics with the torque held. Every controller, the stiff
    /// position servo included, is sampled at the control rate.
    pub fn tick(&mut self) -> Result<TickRecord> {
        let t0 = self.tick as f64 * self.ctrl_dt;
        let reference = self.reference.sample_at(t0);

        let started = Instant::now();
        let output = self
            .controller
            .step(&self.state, &reference, self.ctrl_dt)?;
        let elapsed = started.elapsed().as_secs_f64();
        self.step_time_sum += elapsed;
        self.step_time_max = self.step_time_max.max(elapsed);

        let tips = self.model.fingertips().len();
        let mut force_sum = vec![0.0; tips];
        let mut peak: f64 = 0.0;
        let mut transitions = 0u32;
        let torque = output.torque.clone();
        for _ in 0..self.substeps {
            let step = step_dynamics(
                &self.model,
                &self.state,
                &torque,
                &self.scene,
                &self.scene_state,
                self.sim_dt,
            )?;
            let mut per_tip = vec![0.0; tips];
            for c in &step.contacts.contacts {
                per_tip[c.fingertip] += c.event.force_magnitude;
            }
            for k in 0..tips {
                let now = per_tip[k] > 0.0;
                if now != self.in_contact[k] {
                    transitions += 1;
                    self.in_contact[k] = now;
                }
                force_sum[k] += per_tip[k];
                peak = peak.max(per_tip[k]);
            }
            self.state = step.state;
            self.scene_state = step.scene_state;
            self.last_contacts = step.contacts;
        }
        self.tick += 1;

        let (e_rms, eps_rms) = output.error.rms();
        let n = output.profiles.ks.len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        let (articulation, offset) = match self.target {
            Some(i) => {
                let s = &self.scene_state.objects[i];
                (self.scene.objects[i].articulation(s), s.offset.into())
            }
            None => (0.0, [0.0; 3]),
        };
        let record = TickRecord {
            t: self.state.t,
            e_rms,
            eps_rms,
            tip_force: force_sum.iter().map(|f| f / self.substeps as f64).collect(),
            peak_force: peak,
            transitions,
            articulation,
            offset,
            ks_mean: mean(&output.profiles.ks),
            kd_mean: mean(&output.profiles.kd),
            v_mean: mean(&output.profiles.v),
        };
        self.last_reference = Some(reference);
        self.last_output = Some(output);
        Ok(record)
    }

    /// Snapshot of the current tick's controller internals.
    pub fn profile_row(&self) -> Option<ProfileRow> {
        let out = self.last_output.as_ref()?;
        Some(ProfileRow {
            tick: self.tick,
            t: self.state.t,
            ks: out.profiles.ks.clone(),
            kd: out.profiles.kd.clone(),
            v: out.profiles.v.clone(),
            e: out.error.e.clone(),
            eps: out.error.eps.clone(),
            tau: out.torque.tau.clone(),
        })
    }
}

/// A run that stopped on a fault, with everything recorded up to that point.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<MetricsRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} ticks)",
            self.error,
            self.partial.series.len()
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// Output of a run with the profile log kept.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRun {
    pub metrics: MetricsRecord,
    pub profiles: Vec<ProfileRow>,
}

/// Runs the scenario with its configured controller and seed.
pub fn run_scenario(scenario: &Scenario) -> std::result::Result<MetricsRecord, RunFailure> {
    run(scenario, false).map(|r| r.metrics)
}

/// Like [`run_scenario`], also returning per-tick controller profiles.
pub fn run_scenario_logged(scenario: &Scenario) -> std::result::Result<LoggedRun, RunFailure> {
    run(scenario, true)
}

fn run(scenario: &Scenario, log_profiles: bool) -> std::result::Result<LoggedRun, RunFailure> {
    let kind = scenario.controller.kind;
    let empty = |error: Error| RunFailure {
        error,
        partial: Box::new(finish(
            scenario,
            Vec::new(),
            Vec::new(),
            StepTiming::default(),
        )),
    };
    let reference = scenario.build_reference().map_err(empty)?;
    let mut sim = Simulation::new(scenario, kind, reference).map_err(empty)?;
    let ticks = scenario.ticks();
    let mut series = Vec::with_capacity(ticks);
    let mut events: Vec<ContactEvent> = Vec::new();
    let mut profiles = Vec::new();
    for _ in 0..ticks {
        match sim.tick() {
            Ok(rec) => {
                series.push(rec);
                events.extend(sim.last_contacts().events().cloned());
                if log_profiles {
                    profiles.extend(sim.profile_row());
                }
            }
            Err(error) => {
                log::error!("{} aborted at t={:.3}: {error}", scenario.name, sim.time());
                return Err(RunFailure {
                    error,
                    partial: Box::new(finish(scenario, series, events, sim.step_timing())),
                });
            }
        }
    }
    Ok(LoggedRun {
        metrics: finish(scenario, series, events, sim.step_timing()),
        profiles,
    })
}

fn finish(
    scenario: &Scenario,
    series: Vec<TickRecord>,
    events: Vec<ContactEvent>,
    step_timing: StepTiming,
) -> MetricsRecord {
    let aggregates = aggregate(&series, &events);
    let mut record = MetricsRecord {
        scenario: scenario.name.clone(),
        controller: scenario.controller.kind,
        seed: scenario.seed,
        fingertips: scenario
            .model
            .fingertips()
            .iter()
            .map(|f| f.name.clone())
            .collect(),
        series,
        events,
        aggregates,
        step_timing,
    };
    record.aggregates.success = success_check(scenario, &record);
    record
}

/// Writes the profile log: tick, time, then per joint Ks, Kd, v, e, eps and tau.
pub fn write_profile_csv(out: impl std::io::Write, rows: &[ProfileRow]) -> Result<()> {
    let err = |e: csv::Error| Error::format(format!("profile write failed: {e}"));
    let n = rows.first().map_or(0, |r| r.ks.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tick".to_string(), "t".to_string()];
    for name in ["ks", "kd", "v", "e", "eps", "tau"] {
        header.extend((0..n).map(|i| format!("{name}_{i}")));
    }
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut row = vec![r.tick.to_string(), r.t.to_string()];
        for v in [&r.ks, &r.kd, &r.v, &r.e, &r.eps, &r.tau] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::format(format!("profile write failed: {e}")))
}
