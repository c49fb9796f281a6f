use std::sync::{Arc, Mutex};

use super::ReferenceSample;
use crate::error::{ensure_len, Result};
use crate::hand::HandModel;

#[derive(Debug)]
struct Mailbox {
    latest: Option<Vec<f64>>,
    received: u64,
}

/// Control-loop end of a live reference: always yields the latest command.
#[derive(Debug, Clone)]
pub struct LiveReference {
    mailbox: Arc<Mutex<Mailbox>>,
    rest: Vec<f64>,
}

/// Network end of a live reference. Cloning gives more writers; the last write wins.
#[derive(Debug, Clone)]
pub struct LiveSender {
    mailbox: Arc<Mutex<Mailbox>>,
    limits: Vec<(f64, f64)>,
}

/// Creates a connected sender/receiver pair. Before any command arrives the
/// reference is the model's rest pose.
pub fn live_channel(model: &HandModel) -> (LiveSender, LiveReference) {
    let mailbox = Arc::new(Mutex::new(Mailbox {
        latest: None,
        received: 0,
    }));
    (
        LiveSender {
            mailbox: mailbox.clone(),
            limits: model.limits(),
        },
        LiveReference {
            mailbox,
            rest: model.rest_pose(),
        },
    )
}

impl LiveSender {
    /// Clamps to joint limits and replaces any unread command. Returns the
    /// stored value.
    pub fn send(&self, q_d: &[f64]) -> Result<Vec<f64>> {
        ensure_len("command", q_d.len(), self.limits.len())?;
        if q_d.iter().any(|q| !q.is_finite()) {
            return Err(crate::Error::invalid("command contains non-finite values"));
        }
        let clamped: Vec<f64> = q_d
            .iter()
            .zip(&self.limits)
            .map(|(q, (lo, hi))| q.clamp(*lo, *hi))
            .collect();
        let mut mb = self.mailbox.lock().expect("mailbox poisoned");
        mb.latest = Some(clamped.clone());
        mb.received += 1;
        Ok(clamped)
    }
}

impl LiveReference {
    pub fn sample_at(&self, t: f64) -> ReferenceSample {
        let mb = self.mailbox.lock().expect("mailbox poisoned");
        ReferenceSample {
            t,
            q_d: mb.latest.clone().unwrap_or_else(|| self.rest.clone()),
        }
    }

    /// Number of commands accepted so far.
    pub fn received(&self) -> u64 {
        self.mailbox.lock().expect("mailbox poisoned").received
    }

    /// Forgets the last command, returning to the rest pose.
    pub fn reset(&self) {
        self.mailbox.lock().expect("mailbox poisoned").latest = None;
    }
}
