use gridcascade::dynamics::{simulate_cascade, ControlConfig, ControlMode, Outcome, SimConfig};
use gridcascade::flow::{static_cascade, OverloadThreshold};
use gridcascade::harness::{
    classify_all_lines, classify_lines, critical_gain_table, default_gain_grid, gain_sweep,
    pinning_experiment, LineLabel,
};
use gridcascade::ingest::builtin_five_node;
use gridcascade::report;

#[test]
fn control_at_zero_gain_matches_uncontrolled() {
    let case = builtin_five_node();
    for line in case.topology.lines() {
        let off = simulate_cascade(&case.topology, &case.params, line.key, &case.sim, &ControlConfig::off(5)).unwrap();
        let full = gain_sweep(&case, &case.sim, line.key, &[0.0], ControlMode::Full, &[]).unwrap();
        assert_eq!(full.points[0].n_c, off.n_c, "fault {}", case.format_line(line.key));
    }
}

#[test]
fn sweep_of_fault_2_4() {
    let case = builtin_five_node();
    let fault = case.line_key(2, 4).unwrap();
    let curve = gain_sweep(&case, &case.sim, fault, &[0.5, 0.0], ControlMode::Full, &[]).unwrap();
    let n: Vec<usize> = curve.points.iter().map(|p| p.n_c).collect();
    assert_eq!(n, vec![5, 0]);
    assert!(curve.post_fault_connected);
    assert_eq!(report::gain_curve_csv(&curve), "k_c,n_c\n0,5\n0.5,0\n");
}

#[test]
fn gain_above_critical_stops_fault_2_3() {
    let case = builtin_five_node();
    let fault = case.line_key(2, 3).unwrap();
    let curve = gain_sweep(&case, &case.sim, fault, &[1.76, 2.5], ControlMode::Full, &[]).unwrap();
    assert!(curve.points.iter().all(|p| p.n_c == 0));
}

/// On the default grid, each dynamic-only fault has a sampled gain from which
/// n_c stays zero, and that gain does not exceed the critical value.
#[test]
fn default_grid_reaches_zero_below_critical_gain() {
    let case = builtin_five_node();
    let params = case.linear_params().unwrap();
    for (a, b) in [(1, 2), (2, 3), (2, 4)] {
        let fault = case.line_key(a, b).unwrap();
        let bar = gridcascade::critical_gain(&case.topology.remove_line(fault).unwrap(), params)
            .unwrap()
            .value;
        let curve = gain_sweep(&case, &case.sim, fault, &default_gain_grid(bar), ControlMode::Full, &[]).unwrap();
        let onset = curve.zero_onset().expect("curve reaches zero");
        assert!(onset <= bar, "({a},{b}): onset {onset} above {bar}");
        assert!(curve.points[0].n_c > 0);
    }
}

#[test]
fn pinning_generators_with_high_gain() {
    let case = builtin_five_node();
    let pinned = [case.index_of(2).unwrap(), case.index_of(5).unwrap()];
    let fault = case.line_key(2, 4).unwrap();
    let sim = SimConfig {
        horizon: 400.0,
        ..case.sim
    };
    let curves = pinning_experiment(&case, &sim, &pinned, &[fault], &[0.0, 20.0]).unwrap();
    assert_eq!(curves[0].points[0].n_c, 5);
    assert_eq!(curves[0].points[1].n_c, 0);
    assert_eq!(curves[0].points[1].outcome, Outcome::Settled);
}

#[test]
fn classification_is_order_independent() {
    let case = builtin_five_node();
    let mut faults: Vec<_> = case.topology.lines().iter().map(|l| l.key).collect();
    let forward = classify_lines(&case, &case.sim, &faults);
    faults.reverse();
    let backward = classify_lines(&case, &case.sim, &faults);
    assert_eq!(forward, backward);
    assert_eq!(forward, classify_all_lines(&case, &case.sim));
}

#[test]
fn unreachable_threshold_makes_every_line_safe() {
    let case = builtin_five_node();
    let sim = SimConfig::with_threshold(OverloadThreshold::new(1.0).unwrap());
    let table = classify_all_lines(&case, &sim);
    assert_eq!(table.count(LineLabel::Safe), 7);
}

#[test]
fn static_cascades_of_the_five_node_grid() {
    let case = builtin_five_node();
    for line in case.topology.lines() {
        let r = static_cascade(&case.topology, &case.params, line.key, case.threshold()).unwrap();
        let (a, b) = case.line_labels(line.key);
        let expect_failure = matches!((a, b), (1, 5) | (4, 5));
        assert_eq!(r.n_c > 0, expect_failure, "({a},{b})");
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let case = builtin_five_node();
    let render = || {
        let table = classify_all_lines(&case, &case.sim);
        let faults: Vec<_> = case.topology.lines().iter().map(|l| l.key).collect();
        let rows = critical_gain_table(&case, &faults).unwrap();
        format!(
            "{}{}{}",
            report::classification_json(&case, &table),
            report::classification_csv(&case, &table),
            report::critical_gain_csv(&case, &rows)
        )
    };
    assert_eq!(render().into_bytes(), render().into_bytes());
}

#[test]
fn simulation_is_deterministic() {
    let case = builtin_five_node();
    let fault = case.line_key(1, 2).unwrap();
    let control = ControlConfig::full(5, 0.3).unwrap();
    let a = simulate_cascade(&case.topology, &case.params, fault, &case.sim, &control).unwrap();
    let b = simulate_cascade(&case.topology, &case.params, fault, &case.sim, &control).unwrap();
    assert_eq!(a, b);
    assert!(a.tripped.windows(2).all(|w| w[0].mark.value() <= w[1].mark.value()));
}

#[test]
fn emitted_reports_match_rendered_text() {
    use report::{emit_report, render, ReportData, ReportFormat};
    let case = builtin_five_node();
    let table = classify_all_lines(&case, &case.sim);
    let dir = tempfile::tempdir().unwrap();
    for (format, name) in [(ReportFormat::Csv, "c.csv"), (ReportFormat::Json, "c.json")] {
        let path = dir.path().join("nested").join(name);
        emit_report(&case, ReportData::Classification(&table), format, &path).unwrap();
        let expected = render(&case, ReportData::Classification(&table), format);
        assert_eq!(std::fs::read_to_string(path).unwrap(), expected);
    }
}
