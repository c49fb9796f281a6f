//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. All tolerances are pinned here.

use std::time::Instant;

use adaptive_hand::basis::phase_step_scaled;
use adaptive_hand::controller::update_params_in_place;
use adaptive_hand::hand::step_dynamics;
use adaptive_hand::{
    compare_controllers, compliant_profiles, compute_torque, run_scenario, update_params,
    AdaptationGains, AdaptiveController, AdaptiveParams, ControllerKind, GaussianBasis, HandModel,
    ImpedanceGains, JointState, PhaseState, ReferenceSample, Scenario, Scene, TrackingError,
};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP_BUDGET_S: f64 = 1e-3;
const STEP_TICKS: usize = 20_000;
const CASES: usize = 1000;
const TOL: f64 = 1e-12;
const SUITE_LIMIT_S: f64 = 5.0;
const DISTURBANCE_RATIO: f64 = 0.20;
const CONVERGENCE_RANGE: (f64, f64) = (1.7, 2.3);
const TOUCH_SEEDS: u64 = 10;
const TOUCH_GAP: f64 = 0.10;
const TOUCH_LIMIT_S: f64 = 300.0;
const OSCILLATION_RATIO: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}

fn shipped_adaptive(name: &str) -> AdaptiveController {
    let scenario = Scenario::builtin(name).unwrap();
    match scenario.build_controller(ControllerKind::Adaptive).unwrap() {
        adaptive_hand::Controller::Adaptive(a) => a,
        _ => unreachable!("asked for the adaptive controller"),
    }
}

fn step_budget() -> Outcome {
    let mut ctrl = shipped_adaptive("grasp_ball");
    assert_eq!((ctrl.dofs(), ctrl.basis.len()), (24, 10));
    let mut r = rng(1);
    let mut state = JointState::at_rest(vec![0.0; 24]);
    let mut total = 0.0;
    for k in 0..STEP_TICKS {
        for q in state.q.iter_mut().chain(state.q_dot.iter_mut()) {
            *q = r.random_range(-0.05..0.05);
        }
        let reference = ReferenceSample {
            t: k as f64 * 0.01,
            q_d: vec![0.1; 24],
        };
        let started = Instant::now();
        std::hint::black_box(ctrl.step(&state, &reference, 0.01).unwrap());
        total += started.elapsed().as_secs_f64();
    }
    let mean = total / STEP_TICKS as f64;
    outcome(
        mean < STEP_BUDGET_S,
        format!(
            "mean {:.2} us over {STEP_TICKS} ticks (budget 1 ms)",
            mean * 1e6
        ),
    )
}

/// Direct normalized Gaussian evaluation, no max shift.
fn basis_oracle(centers: &[f64], widths: &[f64], s: f64) -> Vec<f64> {
    let w: Vec<f64> = centers
        .iter()
        .zip(widths)
        .map(|(c, h)| (-0.5 * h * (s - c) * (s - c)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn basis_suite() -> Outcome {
    let started = Instant::now();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in 0..CASES {
        let n = r.random_range(1..=20);
        let centers: Vec<f64> = (0..n).map(|_| r.random_range(0.01..=1.0)).collect();
        let widths: Vec<f64> = (0..n).map(|_| r.random_range(1.0..300.0)).collect();
        let basis = GaussianBasis::new(centers.clone(), widths.clone(), 1.0).unwrap();
        let s = r.random_range(1e-3..=1.0);
        let g = basis.eval(s);

        let sum: f64 = g.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        if (sum - 1.0).abs() > TOL || !g.iter().all(|x| *x > 0.0) {
            failures.push(format!("case {case}: sum {sum}"));
        }
        for (a, b) in g.iter().zip(basis_oracle(&centers, &widths, s)) {
            worst = worst.max((a - b).abs());
            if (a - b).abs() > TOL {
                failures.push(format!("case {case}: oracle {a} vs {b}"));
            }
        }

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let permuted = GaussianBasis::new(
            perm.iter().map(|&i| centers[i]).collect(),
            perm.iter().map(|&i| widths[i]).collect(),
            1.0,
        )
        .unwrap();
        let gp = permuted.eval(s);
        for (k, &i) in perm.iter().enumerate() {
            worst = worst.max((gp[k] - g[i]).abs());
            if (gp[k] - g[i]).abs() > TOL {
                failures.push(format!("case {case}: permutation"));
            }
        }

        let tau = r.random_range(0.1..5.0);
        let (a, b) = (r.random_range(0.0..2.0), r.random_range(0.0..2.0));
        let p = PhaseState {
            s: r.random_range(1e-3..1.0),
        };
        let two = phase_step_scaled(phase_step_scaled(p, a, tau).unwrap(), b, tau).unwrap();
        let one = phase_step_scaled(p, a + b, tau).unwrap();
        worst = worst.max((two.s - one.s).abs());
        if (two.s - one.s).abs() > TOL {
            failures.push(format!("case {case}: phase composition"));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && elapsed < SUITE_LIMIT_S,
        format!(
            "{CASES} cases, worst deviation {worst:.1e}, {} failures, {elapsed:.2} s",
            failures.len()
        ),
    )
}

fn random_params(r: &mut ChaCha8Rng, dofs: usize, n: usize) -> AdaptiveParams {
    let mut m = || DMatrix::from_fn(dofs, n, |_, _| r.random_range(-2.0..2.0));
    AdaptiveParams {
        theta_k: m(),
        theta_d: m(),
        theta_v: m(),
    }
}

fn zero_error_fixed_point() -> Outcome {
    let mut r = rng(3);
    let mut bad = 0;
    for _ in 0..CASES {
        let dofs = r.random_range(1..=24);
        let n = r.random_range(1..=12);
        let params = random_params(&mut r, dofs, n);
        let gains = AdaptationGains::new(
            (0..dofs).map(|_| r.random_range(0.1..20.0)).collect(),
            (0..dofs).map(|_| r.random_range(0.1..20.0)).collect(),
            (0..dofs).map(|_| r.random_range(0.1..20.0)).collect(),
            r.random_range(0.5..20.0),
        )
        .unwrap();
        let err = TrackingError::new(vec![0.0; dofs], vec![0.0; dofs], gains.pi).unwrap();
        let g = GaussianBasis::time_uniform(n, 5.0, 1.0, 1.0)
            .unwrap()
            .eval(r.random_range(0.01..1.0));
        let next = update_params(&params, &gains, &err, &g, r.random_range(1e-4..0.1)).unwrap();
        let profiles = compliant_profiles(&next, &g).unwrap();
        let tau = compute_torque(&err, &profiles, &vec![1e6; dofs]);
        let minus_v: Vec<f64> = profiles.v.iter().map(|v| -v).collect();
        if next != params || tau.tau != minus_v {
            bad += 1;
        }
    }
    // the same through a full controller tick at the reference
    let mut ctrl = shipped_adaptive("turn_cap");
    ctrl.params = random_params(&mut r, 24, 10);
    let before = ctrl.params.clone();
    let q_d: Vec<f64> = (0..24).map(|i| 0.01 * i as f64).collect();
    let state = JointState::at_rest(q_d.clone());
    let out = ctrl
        .step(&state, &ReferenceSample { t: 0.0, q_d }, 0.01)
        .unwrap();
    let loop_ok = ctrl.params == before
        && out
            .torque
            .tau
            .iter()
            .zip(&out.profiles.v)
            .all(|(t, v)| *t == (-v).clamp(-5.0, 5.0));
    outcome(
        bad == 0 && loop_ok,
        format!("{CASES} random cases, {bad} mismatches; controller tick bit-exact: {loop_ok}"),
    )
}

fn update_law_oracle() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..CASES {
        let dofs = r.random_range(1..=24);
        let n = r.random_range(1..=12);
        let params = random_params(&mut r, dofs, n);
        let q: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..dofs).map(|_| r.random_range(0.0..20.0)).collect())
            .collect();
        let pi = r.random_range(0.0..20.0);
        let gains = AdaptationGains::new(q[0].clone(), q[1].clone(), q[2].clone(), pi).unwrap();
        let e: Vec<f64> = (0..dofs).map(|_| r.random_range(-1.0..1.0)).collect();
        let ed: Vec<f64> = (0..dofs).map(|_| r.random_range(-5.0..5.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let dt = r.random_range(1e-4..0.05);
        let err = TrackingError::new(e.clone(), ed.clone(), pi).unwrap();
        let got = update_params(&params, &gains, &err, &g, dt).unwrap();

        // oracle: one matrix at a time, one entry at a time
        let mats = [&params.theta_k, &params.theta_d, &params.theta_v];
        let outs = [&got.theta_k, &got.theta_d, &got.theta_v];
        for m in 0..3 {
            for i in 0..dofs {
                for j in 0..n {
                    let eps = ed[i] + pi * e[i];
                    let signal = match m {
                        0 => e[i],
                        1 => ed[i],
                        _ => 1.0,
                    };
                    let expected = mats[m][(i, j)] + q[m][i] * eps * signal * g[j] * dt;
                    worst = worst.max((outs[m][(i, j)] - expected).abs());
                }
            }
        }
    }
    outcome(
        worst <= TOL,
        format!("{CASES} random cases, worst deviation {worst:.1e}"),
    )
}

/// Steady-state mean |e| over the last second of a 10 s hold against a
/// constant load, for one joint.
fn hold_against_load(adaptive: bool) -> f64 {
    let model = HandModel::single_joint(0.05, 0.01, 0.02, 5.0);
    let scene = Scene {
        objects: Vec::new(),
        external_torque: vec![0.5],
    };
    let scene_state = scene.initial_state();
    let (ks, kd) = (5.0, 0.1);
    let basis = GaussianBasis::time_uniform(10, 10.0, 1.0, 1.0).unwrap();
    let mut ctrl = AdaptiveController::new(
        basis,
        1.0,
        AdaptiveParams::initial(1, 10, ks, kd),
        AdaptationGains::uniform(1, 5.0, 0.5, 5.0, 10.0).unwrap(),
        vec![5.0],
    )
    .unwrap();
    let gains = ImpedanceGains::uniform(1, ks, kd);
    let reference = ReferenceSample {
        t: 0.0,
        q_d: vec![0.0],
    };
    let mut state = JointState::at_rest(vec![0.0]);
    let (ctrl_dt, substeps) = (0.01, 10);
    let mut tail = Vec::new();
    for tick in 0..1000 {
        let tau = if adaptive {
            ctrl.step(&state, &reference, ctrl_dt).unwrap().torque
        } else {
            adaptive_hand::fixed_gain_step(&state, &reference, &gains, &[5.0]).unwrap()
        };
        for _ in 0..substeps {
            state = step_dynamics(
                &model,
                &state,
                &tau,
                &scene,
                &scene_state,
                ctrl_dt / substeps as f64,
            )
            .unwrap()
            .state;
        }
        if tick >= 900 {
            tail.push(state.q[0].abs());
        }
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn disturbance_rejection() -> Outcome {
    let started = Instant::now();
    let fixed = hold_against_load(false);
    let adaptive = hold_against_load(true);
    let elapsed = started.elapsed().as_secs_f64();
    let ratio = adaptive / fixed;
    outcome(
        ratio < DISTURBANCE_RATIO && elapsed < SUITE_LIMIT_S,
        format!(
            "|e| adaptive {adaptive:.2e} rad, fixed {fixed:.2e} rad, ratio {ratio:.3} (< {DISTURBANCE_RATIO}), {elapsed:.2} s"
        ),
    )
}

fn integration_consistency() -> Outcome {
    // Integrate the law along a smooth error signal over 2 s at decreasing dt.
    let basis = GaussianBasis::time_uniform(6, 2.0, 1.0, 1.0).unwrap();
    let gains = AdaptationGains::uniform(2, 3.0, 1.0, 2.0, 5.0).unwrap();
    let run = |steps: usize| {
        let dt = 2.0 / steps as f64;
        let mut p = AdaptiveParams::initial(2, 6, 1.0, 0.1);
        let mut phase = PhaseState { s: 1.0 };
        for k in 0..steps {
            let t = k as f64 * dt;
            let g = basis.eval(phase.s);
            let e = vec![0.2 * t.sin(), 0.1 * (2.0 * t).cos()];
            let ed = vec![0.2 * t.cos(), -0.2 * (2.0 * t).sin()];
            let err = TrackingError::new(e, ed, 5.0).unwrap();
            update_params_in_place(&mut p, &gains, &err, &g, dt, 0.0).unwrap();
            phase = phase_step_scaled(phase, dt, 1.0).unwrap();
        }
        let mut all: Vec<f64> = p.theta_k.iter().copied().collect();
        all.extend(p.theta_d.iter());
        all.extend(p.theta_v.iter());
        all
    };
    let results: Vec<Vec<f64>> = [100, 200, 400, 800, 1600].iter().map(|&s| run(s)).collect();
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let diffs: Vec<f64> = results.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios
        .iter()
        .all(|r| (CONVERGENCE_RANGE.0..=CONVERGENCE_RANGE.1).contains(r));
    outcome(
        pass,
        format!(
            "ratios {} (want [{}, {}])",
            ratios
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join(", "),
            CONVERGENCE_RANGE.0,
            CONVERGENCE_RANGE.1
        ),
    )
}

fn touch_ordering() -> Outcome {
    let started = Instant::now();
    let scenario = Scenario::builtin("touch_mouse").unwrap();
    let kinds = [
        ControllerKind::Adaptive,
        ControllerKind::Fixed,
        ControllerKind::Position,
    ];
    let table = compare_controllers(&scenario, &kinds, TOUCH_SEEDS).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let s: Vec<_> = kinds.iter().map(|&k| table.summary(k).unwrap()).collect();
    let max: Vec<f64> = s.iter().map(|x| x.mean_of_max_force).collect();
    let mean: Vec<f64> = s
        .iter()
        .map(|x| x.mean_of_mean_force.unwrap_or(0.0))
        .collect();
    // each lower value at least 10% below the next
    let ordered = |v: &[f64]| {
        v.windows(2)
            .all(|w| w[0] > 0.0 && w[0] <= (1.0 - TOUCH_GAP) * w[1])
    };
    outcome(
        ordered(&max) && ordered(&mean) && elapsed < TOUCH_LIMIT_S,
        format!(
            "mean of max {:.3} < {:.3} < {:.3} N; mean of mean {:.3} < {:.3} < {:.3} N; {TOUCH_SEEDS} seeds in {elapsed:.1} s",
            max[0], max[1], max[2], mean[0], mean[1], mean[2]
        ),
    )
}

fn stiff_contact_oscillation() -> Outcome {
    let base = Scenario::builtin("grasp_ball").unwrap().with_seed(0);
    let rate = |kind| {
        let mut s = base.clone();
        s.controller.kind = kind;
        run_scenario(&s).unwrap().aggregates.transition_rate
    };
    let position = rate(ControllerKind::Position);
    let adaptive = rate(ControllerKind::Adaptive);
    outcome(
        position >= OSCILLATION_RATIO * adaptive,
        format!(
            "make/break rate position {position:.2}/s, adaptive {adaptive:.2}/s, ratio {:.1} (>= {OSCILLATION_RATIO})",
            position / adaptive
        ),
    )
}

fn task_success() -> Outcome {
    let mut report = Vec::new();
    let mut all = true;
    for name in ["grasp_ball", "open_door", "turn_cap", "touch_mouse"] {
        let mut s = Scenario::builtin(name).unwrap().with_seed(0);
        s.controller.kind = ControllerKind::Adaptive;
        let ok = run_scenario(&s).unwrap().aggregates.success;
        all &= ok;
        report.push(format!("{name} {}", if ok { "ok" } else { "FAILED" }));
    }
    outcome(all, report.join(", "))
}

fn determinism() -> Outcome {
    let mut report = Vec::new();
    let mut all = true;
    for name in ["grasp_ball", "open_door", "turn_cap", "touch_mouse"] {
        let s = Scenario::builtin(name).unwrap();
        let a = run_scenario(&s).unwrap().csv_string();
        let b = run_scenario(&s).unwrap().csv_string();
        all &= a == b;
        report.push(format!(
            "{name} {} bytes{}",
            a.len(),
            if a == b { "" } else { " DIFFER" }
        ));
    }
    outcome(all, report.join(", "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("controller step budget", step_budget),
        ("basis suite", basis_suite),
        ("zero-error fixed point", zero_error_fixed_point),
        ("update-law oracle", update_law_oracle),
        ("disturbance rejection", disturbance_rejection),
        ("integration consistency", integration_consistency),
        ("touch-task ordering", touch_ordering),
        ("stiff-contact oscillation", stiff_contact_oscillation),
        ("task success", task_success),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
