//! Task scenarios, the closed-loop runner, metrics and controller comparison.

mod compare;
mod config;
mod metrics;
mod run;

pub use compare::{compare_controllers, ComparisonRow, ComparisonTable, ControllerSummary};
pub use config::{
    builtin_scenario_text, builtin_scenarios, BasisConfig, ControllerConfig, PerDof, Perturbation,
    ReferenceConfig, Scenario, SuccessConfig, TaskKind, TeleopConfig,
};
pub use metrics::{
    aggregate, contact_dispersion, success_check, Aggregates, MetricsRecord, StepTiming, TickRecord,
};
pub use run::{
    run_scenario, run_scenario_logged, write_profile_csv, LoggedRun, ProfileRow, RunFailure,
    Simulation,
};
