// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_hand::reference::{save_trajectory, ReferenceSample};
use adaptive_hand::scenario::{
    compare_controllers, run_scenario_logged, write_profile_csv, ReferenceConfig, TaskKind,
};
use adaptive_hand::{ControllerKind, Error, Scenario};
use adaptive_hand_cli::server::{ServeOptions, Server, Stopped};
use clap::{Parser, Subcommand};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_TASK_FAILED: u8 = 2;
const EXIT_FAULT: u8 = 3;

/// Simulate a multi-finger hand under adaptive impedance control.
///
/// Exit status: 0 success, 1 bad usage or input, 2 task not achieved, 3 fault.
#[derive(Debug, Parser)]
#[command(name = "adaptive-hand", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write per-tick metrics.
    Simulate {
        /// Scenario file, or the name of a built-in scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_parser = parse_controller)]
        controller: Option<ControllerKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario duration, s.
        #[arg(long)]
        duration: Option<f64>,
        /// Metrics CSV. A `<stem>.summary.toml` is written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-tick Ks, Kd, v, errors and torques.
        #[arg(long)]
        profile_log: Option<PathBuf>,
    },
    /// Run every controller over seeds 0..N and tabulate the aggregates.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 10)]
        repeats: u64,
        /// Controllers to include, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_controller,
              default_value = "adaptive,fixed,position")]
        controllers: Vec<ControllerKind>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the scripted reference for a task as a trajectory CSV.
    GenRef {
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long)]
        out: PathBuf,
        /// Take object geometry and timing from this scenario instead of the shipped one.
        #[arg(long)]
        scenario: Option<String>,
        /// Sample interval, s. Defaults to the control period.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run a scenario live, steered over a WebSocket at `/teleop`.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value = "grasp_ball")]
        scenario: String,
        #[arg(long, value_parser = parse_controller)]
        controller: Option<ControllerKind>,
        /// State broadcasts per second.
        #[arg(long, default_value_t = adaptive_hand::teleop::STATE_RATE)]
        rate: f64,
        /// Directory of static files (the browser panel) to serve alongside.
        #[arg(long)]
        web_root: Option<PathBuf>,
    },
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let code = match cli.command {
        Command::Simulate {
            scenario,
            controller,
            seed,
            duration,
            out,
            profile_log,
        } => simulate(&scenario, controller, seed, duration, out, profile_log),
        Command::Compare {
            scenario,
            repeats,
            controllers,
            duration,
            out,
        } => compare(&scenario, repeats, &controllers, duration, out),
        Command::GenRef {
            task,
            out,
            scenario,
            dt,
        } => gen_ref(task, &out, scenario.as_deref(), dt),
        Command::Serve {
            port,
            host,
            scenario,
            controller,
            rate,
            web_root,
        } => serve(
            SocketAddr::new(host, port),
            &scenario,
            controller,
            rate,
            web_root,
        ),
    };
    ExitCode::from(code)
}

/// Maps an error to its exit status after reporting it.
fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    if e.is_fault() {
        EXIT_FAULT
    } else {
        EXIT_USAGE
    }
}

fn load(spec: &str, duration: Option<f64>) -> Result<Scenario, Error> {
    let mut s = Scenario::resolve(spec)?;
    if let Some(d) = duration {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "duration must be >= 0, got {d}"
            )));
        }
        s.duration = d;
    }
    Ok(s)
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "metrics".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.toml"))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn simulate(
    spec: &str,
    controller: Option<ControllerKind>,
    seed: Option<u64>,
    duration: Option<f64>,
    out: Option<PathBuf>,
    profile_log: Option<PathBuf>,
) -> u8 {
    let mut scenario = match load(spec, duration) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    if let Some(kind) = controller {
        scenario.controller.kind = kind;
    }
    let (run, fault) = match run_scenario_logged(&scenario) {
        Ok(run) => (run, None),
        Err(failure) => {
            let partial = adaptive_hand::scenario::LoggedRun {
                metrics: *failure.partial,
                profiles: Vec::new(),
            };
            (partial, Some(failure.error))
        }
    };
    let metrics = &run.metrics;
    let written = (|| -> Result<(), Error> {
        if let Some(out) = &out {
            metrics.save_csv(out)?;
            write_text(&summary_path(out), &metrics.summary_toml())?;
        }
        if let Some(path) = &profile_log {
            let file = std::fs::File::create(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            write_profile_csv(std::io::BufWriter::new(file), &run.profiles)?;
        }
        Ok(())
    })();
    if let Some(e) = fault {
        if let Err(w) = written {
            eprintln!("error: {w}");
        }
        return fail(&e);
    }
    if let Err(e) = written {
        return fail(&e);
    }
    if out.is_none() {
        print!("{}", metrics.summary_toml());
    }
    let a = &metrics.aggregates;
    eprintln!(
        "{} / {} / seed {}: success = {}, max force = {:.3} N",
        metrics.scenario, metrics.controller, metrics.seed, a.success, a.max_force
    );
    if a.success {
        EXIT_OK
    } else {
        EXIT_TASK_FAILED
    }
}

fn compare(
    spec: &str,
    repeats: u64,
    controllers: &[ControllerKind],
    duration: Option<f64>,
    out: Option<PathBuf>,
) -> u8 {
    let scenario = match load(spec, duration) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let table = match compare_controllers(&scenario, controllers, repeats) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let written = match &out {
        Some(path) => std::fs::File::create(path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })
            .and_then(|f| table.write_csv(std::io::BufWriter::new(f))),
        None => table.write_csv(std::io::stdout().lock()),
    };
    if let Err(e) = written {
        return fail(&e);
    }
    for s in &table.summaries {
        eprintln!(
            "{:>8}: mean max force {:.3} N, mean force {}, success {:.0}%",
            s.controller.as_str(),
            s.mean_of_max_force,
            s.mean_of_mean_force
                .map_or("-".into(), |m| format!("{m:.3} N")),
            100.0 * s.success_rate
        );
    }
    EXIT_OK
}

fn gen_ref(task: TaskKind, out: &Path, spec: Option<&str>, dt: Option<f64>) -> u8 {
    let result = (|| -> Result<(), Error> {
        let mut scenario = load(spec.unwrap_or(task.scenario_name()), None)?;
        match &mut scenario.reference {
            ReferenceConfig::Task {
                task: t, teleop, ..
            } if *t == task => *teleop = None,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "scenario {} has no scripted {task:?} reference",
                    scenario.name
                )))
            }
        }
        let dt = dt.unwrap_or(scenario.ctrl_dt);
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let provider = scenario.build_reference()?;
        let n = (scenario.duration / dt).round() as usize;
        let samples: Vec<ReferenceSample> =
            (0..=n).map(|k| provider.sample_at(k as f64 * dt)).collect();
        save_trajectory(out, &samples)
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&e),
    }
}

fn serve(
    addr: SocketAddr,
    spec: &str,
    controller: Option<ControllerKind>,
    rate: f64,
    web_root: Option<PathBuf>,
) -> u8 {
    let mut scenario = match load(spec, None) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    if let Some(kind) = controller {
        scenario.controller.kind = kind;
    }
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    runtime.block_on(async move {
        let options = ServeOptions {
            addr,
            rate,
            web_root,
        };
        let server = match Server::bind(scenario, options).await {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: cannot listen on {addr}: {e}");
                return EXIT_USAGE;
            }
        };
        match server.local_addr() {
            Ok(a) => println!("listening on ws://{a}/teleop"),
            Err(e) => eprintln!("warning: {e}"),
        }
        let interrupt = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match server.run(interrupt).await {
            Ok(Stopped::Shutdown) => EXIT_OK,
            Ok(Stopped::Fault(e)) | Err(e) => fail(&e),
        }
    })
}
