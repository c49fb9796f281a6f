use adaptive_hand::scenario::{
    aggregate, compare_controllers, run_scenario_logged, write_profile_csv,
};
use adaptive_hand::{run_scenario, ControllerKind, Error, Scenario};

fn short(name: &str, seconds: f64) -> Scenario {
    let mut s = Scenario::builtin(name).unwrap();
    s.duration = seconds;
    s
}

#[test]
fn zero_duration_gives_empty_series() {
    let s = short("touch_mouse", 0.0);
    let m = run_scenario(&s).unwrap();
    assert!(m.series.is_empty());
    assert!(m.events.is_empty());
    assert_eq!(m.aggregates.max_force, 0.0);
    assert_eq!(m.aggregates.mean_force, None);
    assert_eq!(m.aggregates.first_contact, None);
    assert!(!m.aggregates.success);
    // header and trailing block only
    let csv = m.csv_string();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1);
}

#[test]
fn same_seed_gives_identical_csv() {
    for name in ["touch_mouse", "grasp_ball"] {
        let s = short(name, 1.5);
        let a = run_scenario(&s).unwrap().csv_string();
        let b = run_scenario(&s).unwrap().csv_string();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn other_seed_moves_objects_only() {
    let s = short("grasp_ball", 0.5);
    let a = s.with_seed(1);
    let b = s.with_seed(2);
    assert_eq!(a.objects, b.objects);
    let pose = |s: &Scenario| s.build_scene().objects[0].pose;
    assert_ne!(pose(&a), pose(&b));
    assert_eq!(pose(&a), pose(&s.with_seed(1)));
    assert!(
        (pose(&a).translation.vector - s.objects[0].pose.translation.vector)
            .abs()
            .max()
            <= 0.005
    );
    assert_eq!(a.model, b.model);
    assert_eq!(a.controller, b.controller);
    assert_eq!(a.reference, b.reference);
    assert_eq!(a.success, b.success);
}

#[test]
fn aggregates_recompute_from_series() {
    let s = Scenario::builtin("touch_mouse").unwrap();
    let m = run_scenario(&s).unwrap();
    assert_eq!(m.series.len(), s.ticks());
    let peak = m.series.iter().map(|r| r.peak_force).fold(0.0, f64::max);
    assert_eq!(m.aggregates.max_force, peak);
    assert!(peak > 0.0);
    let mut again = aggregate(&m.series, &m.events);
    again.success = m.aggregates.success;
    assert_eq!(again, m.aggregates);
    // per-tick means never exceed the per-tick peak
    for r in &m.series {
        for f in &r.tip_force {
            assert!(*f <= r.peak_force + 1e-12);
        }
    }
    let summary: toml::Value = toml::from_str(&m.summary_toml()).unwrap();
    assert_eq!(summary["aggregates"]["max_force"].as_float(), Some(peak));
    assert_eq!(summary["ticks"].as_integer(), Some(s.ticks() as i64));
    assert!(summary["controller_step"]["mean"].as_float().unwrap() > 0.0);
}

#[test]
fn csv_rows_match_series() {
    let s = short("open_door", 1.0);
    let m = run_scenario(&s).unwrap();
    let text = m.csv_string();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.len(), 3 + 5 + 9);
    assert_eq!(&header[3], "force_TH");
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), m.series.len());
    for (row, rec) in rows.iter().zip(&m.series) {
        assert_eq!(row[0].parse::<f64>().unwrap(), rec.t);
        assert_eq!(row[8].parse::<f64>().unwrap(), rec.peak_force);
    }
    assert!(text.contains(&format!("# max_force = {}", m.aggregates.max_force)));
    assert!(text.contains("# success = "));
}

#[test]
fn profile_log_has_one_row_per_tick() {
    let s = short("turn_cap", 0.3);
    let run = run_scenario_logged(&s).unwrap();
    assert_eq!(run.profiles.len(), run.metrics.series.len());
    assert_eq!(run.profiles[0].ks.len(), 24);
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &run.profiles).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + 6 * 24);
    assert_eq!(header[2], "ks_0");
    assert_eq!(lines.count(), run.profiles.len());
}

#[test]
fn compare_orders_by_controller_then_seed() {
    let s = short("touch_mouse", 0.5);
    let kinds = [ControllerKind::Position, ControllerKind::Adaptive];
    let table = compare_controllers(&s, &kinds, 3).unwrap();
    let keys: Vec<(ControllerKind, u64)> =
        table.rows.iter().map(|r| (r.controller, r.seed)).collect();
    let expected: Vec<(ControllerKind, u64)> = kinds
        .iter()
        .flat_map(|&k| (0..3).map(move |s| (k, s)))
        .collect();
    assert_eq!(keys, expected);
    for r in &table.rows {
        let mut one = s.with_seed(r.seed);
        one.controller.kind = r.controller;
        let m = run_scenario(&one).unwrap();
        assert_eq!(m.aggregates, r.aggregates);
    }
    let summary = table.summary(ControllerKind::Adaptive).unwrap();
    assert_eq!(summary.runs, 3);
    let mean = table.rows[3..]
        .iter()
        .map(|r| r.aggregates.max_force)
        .sum::<f64>()
        / 3.0;
    assert!((summary.mean_of_max_force - mean).abs() < 1e-12);
}

#[test]
fn compare_single_repeat_matches_run() {
    let s = short("grasp_ball", 0.8);
    let table = compare_controllers(&s, &[s.controller.kind], 1).unwrap();
    let m = run_scenario(&s).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].aggregates, m.aggregates);
    assert_eq!(table.summaries[0].mean_of_max_force, m.aggregates.max_force);
}

#[test]
fn compare_rejects_empty_requests() {
    let s = short("touch_mouse", 0.1);
    assert!(matches!(
        compare_controllers(&s, &[ControllerKind::Adaptive], 0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(compare_controllers(&s, &[], 2).is_err());
}

#[test]
fn comparison_table_csv() {
    let s = short("touch_mouse", 0.3);
    let table =
        compare_controllers(&s, &[ControllerKind::Adaptive, ControllerKind::Fixed], 2).unwrap();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 1 + 4);
    assert!(data[1].starts_with("adaptive,0,"));
    assert!(data[4].starts_with("fixed,1,"));
    assert!(text.contains("# ranking_by_max_force = "));
}
