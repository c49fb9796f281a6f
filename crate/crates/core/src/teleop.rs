//! Live teleoperation: wire messages and the simulation side of a session.
//!
//! Messages are JSON objects with a `type` tag (`state`, `command` or
//! `error`) and a `version`. The network layer only ever touches a
//! [`TeleopHandle`]; the control loop owns the [`TeleopSession`].

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controller::ControllerKind;
use crate::error::{Error, Result};
use crate::hand::{fingertip_position, ContactEvent};
use crate::reference::LiveSender;
use crate::scenario::{Scenario, Simulation, TickRecord};

pub const PROTOCOL_VERSION: u32 = 1;

/// Default state broadcast rate, Hz.
pub const STATE_RATE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingertipState {
    pub name: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSnapshot {
    pub ks: Vec<f64>,
    pub kd: Vec<f64>,
    pub v: Vec<f64>,
}

/// Running totals since the session started or was last reset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveAggregates {
    pub ticks: u64,
    pub max_force: f64,
    pub mean_force: Option<f64>,
    pub transitions: u64,
    pub first_contact: Option<f64>,
    pub articulation: f64,
    #[serde(skip)]
    force_sum: f64,
    #[serde(skip)]
    force_samples: u64,
}

impl LiveAggregates {
    pub fn update(&mut self, rec: &TickRecord) {
        self.ticks += 1;
        self.max_force = self.max_force.max(rec.peak_force);
        for f in rec.tip_force.iter().filter(|f| **f > 0.0) {
            self.force_sum += f;
            self.force_samples += 1;
        }
        self.mean_force =
            (self.force_samples > 0).then(|| self.force_sum / self.force_samples as f64);
        if rec.transitions > 0 && self.first_contact.is_none() {
            self.first_contact = Some(rec.t);
        }
        self.transitions += rec.transitions as u64;
        self.articulation = rec.articulation;
    }
}

/// Server to client, once per broadcast period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMessage {
    pub version: u32,
    /// Session time, s. Keeps increasing across resets.
    pub t: f64,
    pub controller: ControllerKind,
    pub q: Vec<f64>,
    pub q_d: Vec<f64>,
    /// Joint limits as `[lo, hi]`, for client-side sliders.
    pub limits: Vec<[f64; 2]>,
    pub joint_names: Vec<String>,
    pub fingertips: Vec<FingertipState>,
    pub contacts: Vec<ContactEvent>,
    pub profiles: ProfileSnapshot,
    pub aggregates: LiveAggregates,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandMessage {
    pub version: u32,
    pub q_d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerKind>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reset: bool,
}

impl CommandMessage {
    pub fn new(q_d: Vec<f64>) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            q_d,
            controller: None,
            reset: false,
        }
    }
}

/// Reply to a message that could not be applied. The connection stays open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMessage {
    pub version: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Message {
    State(StateMessage),
    Command(CommandMessage),
    Error(ErrorMessage),
}

impl Message {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    /// Checks the version before the body so an unknown version is reported
    /// as such rather than as a schema mismatch.
    pub fn decode(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Protocol(format!("malformed JSON: {e}")))?;
        match value.get("version").and_then(Value::as_u64) {
            Some(v) if v == PROTOCOL_VERSION as u64 => {}
            Some(v) => return Err(Error::Protocol(format!("unsupported version {v}"))),
            None => return Err(Error::Protocol("missing or non-integer version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::Protocol(e.to_string()))
    }
}

pub fn encode_state(s: &StateMessage) -> String {
    Message::State(s.clone()).encode()
}

pub fn encode_command(c: &CommandMessage) -> String {
    Message::Command(c.clone()).encode()
}

pub fn encode_error(message: impl Into<String>) -> String {
    Message::Error(ErrorMessage {
        version: PROTOCOL_VERSION,
        message: message.into(),
    })
    .encode()
}

pub fn decode_state(text: &str) -> Result<StateMessage> {
    match Message::decode(text)? {
        Message::State(s) => Ok(s),
        _ => Err(Error::Protocol("expected a state message".into())),
    }
}

pub fn decode_command(text: &str) -> Result<CommandMessage> {
    match Message::decode(text)? {
        Message::Command(c) => Ok(c),
        _ => Err(Error::Protocol("expected a command message".into())),
    }
}

/// Picks which control ticks to broadcast so that on average `rate` states
/// go out per second of simulated time.
#[derive(Debug, Clone)]
pub struct Decimator {
    period: f64,
    next: f64,
}

impl Decimator {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!(
                "broadcast rate must be positive, got {rate}"
            )));
        }
        Ok(Self {
            period: 1.0 / rate,
            next: 0.0,
        })
    }

    /// True when a state should be sent for time `t`.
    pub fn due(&mut self, t: f64) -> bool {
        // tolerance keeps exact multiples from slipping a tick on rounding
        if t + 1e-9 < self.next {
            return false;
        }
        while self.next <= t + 1e-9 {
            self.next += self.period;
        }
        true
    }
}

#[derive(Debug, Default)]
struct Pending {
    controller: Option<ControllerKind>,
    reset: bool,
}

/// Network side of a session. Cheap to clone; every connection gets one.
#[derive(Debug, Clone)]
pub struct TeleopHandle {
    sender: LiveSender,
    pending: Arc<Mutex<Pending>>,
}

impl TeleopHandle {
    /// Validates and stores a command. The joint targets replace any unread
    /// ones after clamping to the limits; the clamped values are returned.
    /// Resets requested since the last tick are all honoured once.
    pub fn ingest(&self, cmd: &CommandMessage) -> Result<Vec<f64>> {
        if cmd.version != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!(
                "unsupported version {}",
                cmd.version
            )));
        }
        let applied = self.sender.send(&cmd.q_d)?;
        let mut p = self.pending.lock().expect("pending poisoned");
        if cmd.controller.is_some() {
            p.controller = cmd.controller;
        }
        p.reset |= cmd.reset;
        Ok(applied)
    }

    /// Decodes a text frame and ingests it.
    pub fn ingest_text(&self, text: &str) -> Result<Vec<f64>> {
        self.ingest(&decode_command(text)?)
    }
}

/// Control-loop side of a session: a simulation driven by the live reference.
#[derive(Debug)]
pub struct TeleopSession {
    scenario: Scenario,
    sim: Simulation,
    kind: ControllerKind,
    pending: Arc<Mutex<Pending>>,
    aggregates: LiveAggregates,
    /// Session time at the last reset.
    offset: f64,
}

impl TeleopSession {
    /// The scenario's own reference is replaced by the live channel.
    pub fn new(scenario: &Scenario) -> Result<(Self, TeleopHandle)> {
        let (sender, reference) = scenario.build_live_reference();
        let kind = scenario.controller.kind;
        let sim = Simulation::new(scenario, kind, reference)?;
        let pending = Arc::new(Mutex::new(Pending::default()));
        Ok((
            Self {
                scenario: scenario.clone(),
                sim,
                kind,
                pending: pending.clone(),
                aggregates: LiveAggregates::default(),
                offset: 0.0,
            },
            TeleopHandle { sender, pending },
        ))
    }

    pub fn ctrl_dt(&self) -> f64 {
        self.sim.ctrl_dt()
    }

    pub fn controller(&self) -> ControllerKind {
        self.kind
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    /// Session time, s.
    pub fn time(&self) -> f64 {
        self.offset + self.sim.time()
    }

    /// Applies pending switches, then advances one control tick. The joint
    /// reference is read once, so only the latest command takes effect.
    /// A reset returns hand, objects and controller to their initial state;
    /// the reference stays at the latest command.
    pub fn tick(&mut self) -> Result<TickRecord> {
        let pending = std::mem::take(&mut *self.pending.lock().expect("pending poisoned"));
        if pending.reset {
            self.offset += self.sim.time();
            self.sim.reset();
            self.aggregates = LiveAggregates::default();
        }
        if let Some(kind) = pending.controller {
            if kind != self.kind {
                self.sim.switch_controller(kind, &self.scenario)?;
                self.kind = kind;
                log::info!("switched to {kind} controller");
            }
        }
        let rec = self.sim.tick()?;
        self.aggregates.update(&rec);
        Ok(rec)
    }

    /// Snapshot of the latest tick.
    pub fn state(&self) -> StateMessage {
        let model = &self.sim.model;
        let q = self.sim.state.q.clone();
        let q_d = match self.sim.last_reference() {
            Some(r) => r.q_d.clone(),
            None => self.sim.reference.sample_at(0.0).q_d,
        };
        let fingertips = model
            .fingertips()
            .iter()
            .enumerate()
            .map(|(k, f)| FingertipState {
                name: f.name.clone(),
                position: fingertip_position(model, &q, k)
                    .map(|p| p.coords.into())
                    .unwrap_or([f64::NAN; 3]),
            })
            .collect();
        let profiles = self
            .sim
            .last_output()
            .map(|o| ProfileSnapshot {
                ks: o.profiles.ks.clone(),
                kd: o.profiles.kd.clone(),
                v: o.profiles.v.clone(),
            })
            .unwrap_or_default();
        let mut contacts: Vec<ContactEvent> = self.sim.last_contacts().events().cloned().collect();
        for c in &mut contacts {
            c.time += self.offset;
        }
        StateMessage {
            version: PROTOCOL_VERSION,
            t: self.time(),
            controller: self.kind,
            q,
            q_d,
            limits: model.limits().iter().map(|&(lo, hi)| [lo, hi]).collect(),
            joint_names: model.joints.iter().map(|j| j.name.clone()).collect(),
            fingertips,
            contacts,
            profiles,
            aggregates: self.aggregates.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn populated() -> StateMessage {
        let scenario = Scenario::builtin("grasp_ball").unwrap();
        let (mut session, handle) = TeleopSession::new(&scenario).unwrap();
        let mut q = scenario.model.rest_pose();
        q[0] += 0.3;
        handle.ingest(&CommandMessage::new(q)).unwrap();
        for _ in 0..20 {
            session.tick().unwrap();
        }
        session.state()
    }

    #[test]
    fn state_round_trips() {
        let s = populated();
        assert_eq!(s.q.len(), 24);
        assert_eq!(s.profiles.ks.len(), 24);
        assert_eq!(s.fingertips.len(), 5);
        let text = encode_state(&s);
        let back = decode_state(&text).unwrap();
        assert_eq!(back, s);
        for (a, b) in s.q.iter().zip(&back.q) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(encode_state(&back), text);
    }

    #[test]
    fn command_round_trips_and_is_tagged() {
        let mut c = CommandMessage::new(vec![0.1; 24]);
        c.controller = Some(ControllerKind::Fixed);
        let text = encode_command(&c);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["type"], "command");
        assert_eq!(v["controller"], "fixed");
        assert_eq!(decode_command(&text).unwrap(), c);
        let bare = r#"{"type":"command","version":1,"q_d":[0.5]}"#;
        let d = decode_command(bare).unwrap();
        assert_eq!(d.controller, None);
        assert!(!d.reset);
    }

    #[test]
    fn numeric_fidelity() {
        let vals = [
            1.0 / 3.0,
            -2.718281828459045e-7,
            1e-300,
            123456.789012345,
            f64::MIN_POSITIVE,
        ];
        let c = CommandMessage::new(vals.to_vec());
        let back = decode_command(&encode_command(&c)).unwrap();
        for (a, b) in vals.iter().zip(&back.q_d) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn protocol_errors() {
        let bad = [
            r#"{"type":"command","version":2,"q_d":[0.0]}"#,
            r#"{"type":"command","q_d":[0.0]}"#,
            r#"{"type":"command","version":1}"#,
            r#"{"type":"command","version":1,"q_d":[0.0],"extra":1}"#,
            r#"{"type":"bogus","version":1}"#,
            r#"{"type":"command","version":1,"q_d":[0.0],"controller":"pid"}"#,
            "not json",
        ];
        for text in bad {
            assert!(
                matches!(Message::decode(text), Err(Error::Protocol(_))),
                "{text}"
            );
        }
        match Message::decode(r#"{"type":"command","version":7,"q_d":[]}"#) {
            Err(Error::Protocol(m)) => assert!(m.contains("version 7")),
            other => panic!("{other:?}"),
        }
        let err = encode_error("nope");
        assert!(matches!(Message::decode(&err).unwrap(), Message::Error(_)));
        assert!(decode_state(&err).is_err());
    }

    #[test]
    fn decimates_100hz_to_30hz() {
        let mut d = Decimator::new(STATE_RATE).unwrap();
        let sent: Vec<usize> = (1..=300).filter(|&k| d.due(k as f64 * 0.01)).collect();
        // both ends of the 3 s span land on a broadcast instant
        assert_eq!(sent.len(), 91);
        for w in sent.windows(2) {
            assert!((3..=4).contains(&(w[1] - w[0])));
        }
        assert!(Decimator::new(0.0).is_err());
    }

    #[test]
    fn ingest_clamps_and_checks_length() {
        let scenario = Scenario::builtin("touch_mouse").unwrap();
        let (mut session, handle) = TeleopSession::new(&scenario).unwrap();
        let limits = scenario.model.limits();
        let mut q = scenario.model.rest_pose();
        q[3] = limits[3].1 + 1.0;
        let applied = handle.ingest(&CommandMessage::new(q)).unwrap();
        assert_eq!(applied[3], limits[3].1);
        session.tick().unwrap();
        assert_eq!(session.state().q_d[3], limits[3].1);
        assert!(handle.ingest(&CommandMessage::new(vec![0.0; 23])).is_err());
        let mut stale = CommandMessage::new(scenario.model.rest_pose());
        stale.version = 0;
        assert!(matches!(handle.ingest(&stale), Err(Error::Protocol(_))));
    }

    #[test]
    fn latest_command_wins_within_a_tick() {
        let scenario = Scenario::builtin("touch_mouse").unwrap();
        let (mut session, handle) = TeleopSession::new(&scenario).unwrap();
        let rest = scenario.model.rest_pose();
        let mut a = rest.clone();
        a[2] += 0.1;
        let mut b = rest.clone();
        b[2] += 0.2;
        handle.ingest(&CommandMessage::new(a)).unwrap();
        handle.ingest(&CommandMessage::new(b.clone())).unwrap();
        session.tick().unwrap();
        assert_eq!(session.state().q_d, b);
    }

    #[test]
    fn advances_without_commands() {
        let scenario = Scenario::builtin("touch_mouse").unwrap();
        let (mut session, _handle) = TeleopSession::new(&scenario).unwrap();
        for _ in 0..10 {
            session.tick().unwrap();
        }
        let s = session.state();
        assert!((s.t - 0.1).abs() < 1e-9);
        assert_eq!(s.q_d, scenario.model.rest_pose());
        assert_eq!(s.aggregates.ticks, 10);
    }

    #[test]
    fn switch_and_reset_keep_time_monotone() {
        let scenario = Scenario::builtin("touch_mouse").unwrap();
        let (mut session, handle) = TeleopSession::new(&scenario).unwrap();
        for _ in 0..5 {
            session.tick().unwrap();
        }
        let before = session.state().t;
        let mut cmd = CommandMessage::new(scenario.model.rest_pose());
        cmd.controller = Some(ControllerKind::Position);
        cmd.reset = true;
        handle.ingest(&cmd).unwrap();
        session.tick().unwrap();
        let s = session.state();
        assert_eq!(s.controller, ControllerKind::Position);
        assert!(s.t > before);
        assert_eq!(s.aggregates.ticks, 1);
        assert_eq!(session.simulation().ticks_done(), 1);
    }
}
