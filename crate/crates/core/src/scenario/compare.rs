use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::metrics::Aggregates;
use super::run::run_scenario;
use crate::controller::ControllerKind;
use crate::error::{Error, Result};

/// One run of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: ControllerKind,
    pub seed: u64,
    pub aggregates: Aggregates,
    /// Mean controller step time, s.
    pub step_time: f64,
}

/// Per-controller reduction over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub controller: ControllerKind,
    pub runs: usize,
    pub mean_of_max_force: f64,
    pub max_of_max_force: f64,
    /// Mean over runs that touched anything.
    pub mean_of_mean_force: Option<f64>,
    pub mean_transition_rate: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: String,
    /// Ordered by controller (as given), then seed.
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<ControllerSummary>,
    /// Controllers from lowest to highest mean of max force.
    pub ranking_by_max: Vec<ControllerKind>,
    /// Controllers from lowest to highest mean of mean force.
    pub ranking_by_mean: Vec<ControllerKind>,
}

/// Runs every controller on seeds `0..repeats` in parallel. The first failed
/// run's error is returned.
pub fn compare_controllers(
    scenario: &Scenario,
    controllers: &[ControllerKind],
    repeats: u64,
) -> Result<ComparisonTable> {
    if repeats == 0 || controllers.is_empty() {
        return Err(Error::invalid(
            "comparison needs at least one controller and one repeat",
        ));
    }
    let jobs: Vec<(usize, ControllerKind, u64)> = controllers
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| (0..repeats).map(move |s| (i, c, s)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, kind, seed)| {
            let mut s = scenario.with_seed(seed);
            s.controller.kind = kind;
            run_scenario(&s).map(|m| (i, seed, m))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut order = Vec::with_capacity(results.len());
    for r in results {
        let (i, seed, m) = r?;
        order.push((i, seed));
        rows.push(ComparisonRow {
            controller: m.controller,
            seed,
            aggregates: m.aggregates,
            step_time: m.step_timing.mean,
        });
    }
    let mut indexed: Vec<_> = order.into_iter().zip(rows).collect();
    indexed.sort_by_key(|(k, _)| *k);
    let rows: Vec<ComparisonRow> = indexed.into_iter().map(|(_, r)| r).collect();

    let summaries: Vec<ControllerSummary> = controllers
        .iter()
        .map(|&c| summarize(c, rows.iter().filter(|r| r.controller == c)))
        .collect();
    let rank = |key: fn(&ControllerSummary) -> f64| {
        let mut s: Vec<&ControllerSummary> = summaries.iter().collect();
        s.sort_by(|a, b| key(a).total_cmp(&key(b)));
        s.into_iter().map(|x| x.controller).collect()
    };
    Ok(ComparisonTable {
        scenario: scenario.name.clone(),
        ranking_by_max: rank(|s| s.mean_of_max_force),
        ranking_by_mean: rank(|s| s.mean_of_mean_force.unwrap_or(0.0)),
        rows,
        summaries,
    })
}

fn summarize<'a>(
    controller: ControllerKind,
    rows: impl Iterator<Item = &'a ComparisonRow>,
) -> ControllerSummary {
    let rows: Vec<&ComparisonRow> = rows.collect();
    let n = rows.len() as f64;
    let means: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.aggregates.mean_force)
        .collect();
    ControllerSummary {
        controller,
        runs: rows.len(),
        mean_of_max_force: rows.iter().map(|r| r.aggregates.max_force).sum::<f64>() / n,
        max_of_max_force: rows
            .iter()
            .map(|r| r.aggregates.max_force)
            .fold(0.0, f64::max),
        mean_of_mean_force: (!means.is_empty())
            .then(|| means.iter().sum::<f64>() / means.len() as f64),
        mean_transition_rate: rows
            .iter()
            .map(|r| r.aggregates.transition_rate)
            .sum::<f64>()
            / n,
        success_rate: rows.iter().filter(|r| r.aggregates.success).count() as f64 / n,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl ComparisonTable {
    /// Per-run rows, then a commented per-controller summary and rankings.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let err = |e: csv::Error| Error::format(format!("table write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "controller",
            "seed",
            "max_force",
            "mean_force",
            "dispersion",
            "articulation",
            "transition_rate",
            "success",
        ])
        .map_err(err)?;
        for r in &self.rows {
            let a = &r.aggregates;
            w.write_record([
                r.controller.to_string(),
                r.seed.to_string(),
                a.max_force.to_string(),
                opt(a.mean_force),
                opt(a.dispersion),
                a.articulation.to_string(),
                a.transition_rate.to_string(),
                a.success.to_string(),
            ])
            .map_err(err)?;
        }
        let mut out = w
            .into_inner()
            .map_err(|e| Error::format(format!("table write failed: {e}")))?;
        let io = |e: std::io::Error| Error::format(format!("table write failed: {e}"));
        writeln!(out, "# scenario = {}", self.scenario).map_err(io)?;
        for s in &self.summaries {
            writeln!(
                out,
                "# {}: runs = {}, mean_of_max_force = {}, max_of_max_force = {}, mean_of_mean_force = {}, transition_rate = {}, success_rate = {}",
                s.controller,
                s.runs,
                s.mean_of_max_force,
                s.max_of_max_force,
                opt(s.mean_of_mean_force),
                s.mean_transition_rate,
                s.success_rate
            )
            .map_err(io)?;
        }
        let names =
            |v: &[ControllerKind]| v.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" < ");
        writeln!(
            out,
            "# ranking_by_max_force = {}",
            names(&self.ranking_by_max)
        )
        .map_err(io)?;
        writeln!(
            out,
            "# ranking_by_mean_force = {}",
            names(&self.ranking_by_mean)
        )
        .map_err(io)?;
        Ok(())
    }

    pub fn summary(&self, controller: ControllerKind) -> Option<&ControllerSummary> {
        self.summaries.iter().find(|s| s.controller == controller)
    }
}
