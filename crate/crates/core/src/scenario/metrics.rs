use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{Scenario, SuccessConfig};
use crate::controller::ControllerKind;
use crate::error::{Error, Result};
use crate::hand::ContactEvent;

/// One control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Simulation time at the end of the tick, s.
    pub t: f64,
    pub e_rms: f64,
    pub eps_rms: f64,
    /// Mean contact force on each fingertip over the tick's physics steps, N.
    pub tip_force: Vec<f64>,
    /// Largest single-fingertip force seen during the tick, N.
    pub peak_force: f64,
    /// Contact make and break events during the tick, all fingertips.
    pub transitions: u32,
    /// Articulation coordinate of the task object.
    pub articulation: f64,
    /// Displacement of the task object from its initial pose, m.
    pub offset: [f64; 3],
    pub ks_mean: f64,
    pub kd_mean: f64,
    pub v_mean: f64,
}

/// Whole-run summary values, all recomputable from the series and events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub max_force: f64,
    /// Mean fingertip force over in-contact samples; absent without contact.
    pub mean_force: Option<f64>,
    pub dispersion: Option<f64>,
    pub articulation: f64,
    /// End time of the first tick with a contact.
    pub first_contact: Option<f64>,
    /// Make/break events per second after the first contact.
    pub transition_rate: f64,
    pub success: bool,
}

/// Wall-clock cost of the controller step, measured per tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepTiming {
    pub ticks: usize,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub fingertips: Vec<String>,
    pub series: Vec<TickRecord>,
    /// Contacts sampled at the end of every tick.
    pub events: Vec<ContactEvent>,
    pub aggregates: Aggregates,
    pub step_timing: StepTiming,
}

/// RMS distance of contact points from the centroid of their own fingertip's points.
pub fn contact_dispersion(events: &[ContactEvent]) -> Option<f64> {
    if events.is_empty() {
        return None;
    }
    let mut groups: Vec<(&str, Vec<Point3<f64>>)> = Vec::new();
    for e in events {
        let p = Point3::from(e.point);
        match groups.iter_mut().find(|(name, _)| *name == e.fingertip) {
            Some((_, pts)) => pts.push(p),
            None => groups.push((&e.fingertip, vec![p])),
        }
    }
    let mut sum = 0.0;
    for (_, pts) in &groups {
        let c = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / pts.len() as f64;
        sum += pts
            .iter()
            .map(|p| (p.coords - c).norm_squared())
            .sum::<f64>();
    }
    Some((sum / events.len() as f64).sqrt())
}

/// Aggregates from a series, excluding success.
pub fn aggregate(series: &[TickRecord], events: &[ContactEvent]) -> Aggregates {
    let max_force = series.iter().map(|r| r.peak_force).fold(0.0, f64::max);
    let (sum, count) = series
        .iter()
        .flat_map(|r| r.tip_force.iter())
        .filter(|f| **f > 0.0)
        .fold((0.0, 0usize), |(s, n), f| (s + f, n + 1));
    let mean_force = (count > 0).then(|| sum / count as f64);
    let first = series.iter().position(|r| r.transitions > 0);
    let first_contact = first.map(|i| series[i].t);
    let transition_rate = match first {
        Some(i) => {
            let later: u32 = series[i].transitions - 1
                + series[i + 1..].iter().map(|r| r.transitions).sum::<u32>();
            let span = series.last().map_or(0.0, |r| r.t) - series[i].t;
            if span > 0.0 {
                later as f64 / span
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    Aggregates {
        max_force,
        mean_force,
        dispersion: contact_dispersion(events),
        articulation: series.last().map_or(0.0, |r| r.articulation),
        first_contact,
        transition_rate,
        success: false,
    }
}

fn window(series: &[TickRecord], start: f64) -> &[TickRecord] {
    let i = series.partition_point(|r| r.t < start);
    &series[i..]
}

/// Fingertips in contact for at least `fraction` of the window's ticks.
fn sustained(win: &[TickRecord], fraction: f64) -> Vec<usize> {
    let tips = win.first().map_or(0, |r| r.tip_force.len());
    (0..tips)
        .filter(|&k| {
            let on = win.iter().filter(|r| r.tip_force[k] > 0.0).count();
            on as f64 >= fraction * win.len() as f64
        })
        .collect()
}

/// Applies the scenario's success predicate to a finished run.
pub fn success_check(scenario: &Scenario, metrics: &MetricsRecord) -> bool {
    let series = &metrics.series;
    if series.is_empty() {
        return false;
    }
    match &scenario.success {
        SuccessConfig::Grasp {
            window_start,
            max_drop,
            min_contacts,
            sustain_fraction,
            ..
        } => {
            let win = window(series, *window_start);
            let Some(first) = win.first() else {
                return false;
            };
            // Fall below where the object was when the window opened.
            let drop = win
                .iter()
                .map(|r| first.offset[2] - r.offset[2])
                .fold(0.0, f64::max);
            drop < *max_drop && sustained(win, *sustain_fraction).len() >= *min_contacts
        }
        SuccessConfig::Articulation { target, .. } => {
            series.last().is_some_and(|r| r.articulation >= *target)
        }
        SuccessConfig::Touch {
            window_start,
            min_contacts,
            force_ceiling,
            sustain_fraction,
            ..
        } => {
            let win = window(series, *window_start);
            let tips = sustained(win, *sustain_fraction);
            if win.is_empty() || tips.len() < *min_contacts {
                return false;
            }
            let (sum, n) = win
                .iter()
                .flat_map(|r| tips.iter().map(move |&k| r.tip_force[k]))
                .filter(|f| *f > 0.0)
                .fold((0.0, 0usize), |(s, n), f| (s + f, n + 1));
            n > 0 && sum / n as f64 <= *force_ceiling
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl MetricsRecord {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "e_rms", "eps_rms"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.fingertips.iter().map(|f| format!("force_{f}")));
        h.extend(
            [
                "peak_force",
                "transitions",
                "articulation",
                "obj_dx",
                "obj_dy",
                "obj_dz",
                "ks_mean",
                "kd_mean",
                "v_mean",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        h
    }

    /// Per-tick CSV followed by a commented block of aggregates. Contains no
    /// wall-clock data, so identical runs give identical bytes.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let err = |e: csv::Error| Error::format(format!("metrics write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header()).map_err(err)?;
        for r in &self.series {
            let mut row = vec![r.t.to_string(), r.e_rms.to_string(), r.eps_rms.to_string()];
            row.extend(r.tip_force.iter().map(|f| f.to_string()));
            row.extend([
                r.peak_force.to_string(),
                r.transitions.to_string(),
                r.articulation.to_string(),
                r.offset[0].to_string(),
                r.offset[1].to_string(),
                r.offset[2].to_string(),
                r.ks_mean.to_string(),
                r.kd_mean.to_string(),
                r.v_mean.to_string(),
            ]);
            w.write_record(&row).map_err(err)?;
        }
        let mut out = w
            .into_inner()
            .map_err(|e| Error::format(format!("metrics write failed: {e}")))?;
        let a = &self.aggregates;
        let io = |e: std::io::Error| Error::format(format!("metrics write failed: {e}"));
        writeln!(out, "# scenario = {}", self.scenario).map_err(io)?;
        writeln!(out, "# controller = {}", self.controller).map_err(io)?;
        writeln!(out, "# seed = {}", self.seed).map_err(io)?;
        writeln!(out, "# max_force = {}", a.max_force).map_err(io)?;
        writeln!(out, "# mean_force = {}", fmt_opt(a.mean_force)).map_err(io)?;
        writeln!(out, "# dispersion = {}", fmt_opt(a.dispersion)).map_err(io)?;
        writeln!(out, "# articulation = {}", a.articulation).map_err(io)?;
        writeln!(out, "# first_contact = {}", fmt_opt(a.first_contact)).map_err(io)?;
        writeln!(out, "# transition_rate = {}", a.transition_rate).map_err(io)?;
        writeln!(out, "# success = {}", a.success).map_err(io)?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is UTF-8")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Aggregates plus controller timing as TOML.
    pub fn summary_toml(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            scenario: &'a str,
            controller: ControllerKind,
            seed: u64,
            ticks: usize,
            aggregates: SummaryAggregates,
            controller_step: StepTiming,
        }
        #[derive(Serialize)]
        struct SummaryAggregates {
            max_force: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            mean_force: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            dispersion: Option<f64>,
            articulation: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            first_contact: Option<f64>,
            transition_rate: f64,
            success: bool,
        }
        let a = &self.aggregates;
        toml::to_string(&Summary {
            scenario: &self.scenario,
            controller: self.controller,
            seed: self.seed,
            ticks: self.series.len(),
            aggregates: SummaryAggregates {
                max_force: a.max_force,
                mean_force: a.mean_force,
                dispersion: a.dispersion,
                articulation: a.articulation,
                first_contact: a.first_contact,
                transition_rate: a.transition_rate,
                success: a.success,
            },
            controller_step: self.step_timing,
        })
        .expect("summary serializes")
    }
}
