use std::fs;
use std::process::Command;

use ris_xmedia::baselines::Scheme;
use ris_xmedia::config::SystemConfig;
use ris_xmedia::harness::*;

fn quick_system() -> SystemConfig {
    let mut s = SystemConfig::default();
    s.solver.k_max = 10;
    s.ris_elements = 4;
    s
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-xmedia"))
}

#[test]
fn single_row_for_one_trial() {
    let exp = Experiment {
        trials: 1,
        schemes: vec![Scheme::P1],
        ..Experiment::default()
    };
    let out = run_experiment(&quick_system(), &exp).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert!(out.failures.is_empty());
}

#[test]
fn row_count_and_summary_means() {
    let exp = Experiment {
        trials: 2,
        axis: Axis::PowerDbm,
        values: vec![10.0, 20.0, 30.0],
        schemes: vec![Scheme::P2, Scheme::RandPhi],
        ..Experiment::default()
    };
    let out = run_experiment(&quick_system(), &exp).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&out, dir.path()).unwrap();

    let mut rdr = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), RESULTS_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12);

    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    for rec in summary.records().map(Result::unwrap) {
        let (scheme, axis) = (&rec[0], &rec[1]);
        let f: Vec<f64> = rows
            .iter()
            .filter(|r| &r[0] == scheme && &r[1] == axis)
            .map(|r| r[3].parse().unwrap())
            .collect();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert_eq!(rec[2].parse::<usize>().unwrap(), f.len());
        assert_eq!(rec[3].parse::<f64>().unwrap(), mean);
    }

    for p in 0..3 {
        let trace = fs::read_to_string(dir.path().join(format!("trace_P2_{p}.csv"))).unwrap();
        let f: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(f.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

#[test]
fn same_seed_same_bytes() {
    let exp = Experiment {
        trials: 3,
        schemes: vec![Scheme::P1, Scheme::RandPhi],
        ..Experiment::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_results(&run_experiment(&quick_system(), &exp).unwrap(), a.path()).unwrap();
    write_results(&run_experiment(&quick_system(), &exp).unwrap(), b.path()).unwrap();
    for name in ["results.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let mut system = quick_system();
    system.geometry.ris = [3.0, -7.5];
    system.ap_power_dbm = Some(20.0);
    let exp = Experiment {
        name: "rt".into(),
        axis: Axis::N,
        values: vec![4.0, 8.0],
        paired_axis: true,
        ..Experiment::default()
    };
    save_config(&path, &system, &exp).unwrap();
    assert_eq!(load_config(&path).unwrap(), (system, exp));
}

#[test]
fn bad_axis_value_is_recorded_not_fatal() {
    let exp = Experiment {
        trials: 1,
        axis: Axis::N,
        values: vec![2.5, 4.0],
        schemes: vec![Scheme::P2],
        ..Experiment::default()
    };
    let out = run_experiment(&quick_system(), &exp).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert_eq!(out.failures.len(), 1);
}

#[test]
fn cli_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"system": {"ris_elements": 4, "solver": {"k_max": 10}}, "experiment": {"schemes": ["P2", "2bitPhi"]}}"#).unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--trials", "2", "--seed", "7", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn cli_sweep_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"system": {"ris_elements": 4, "solver": {"k_max": 10}}, "experiment": {"schemes": ["EqualT"]}}"#).unwrap();
    let out = dir.path().join("sweep");
    let status = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--axis", "y_ris", "--from", "-10", "--to", "10", "--steps", "3"])
        .args(["--trials", "1", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);

    let o = bin().args(["trace", "--scheme", "P2", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("iteration,F_bits\n0,"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"system": {"ris_elements": 0}}"#).unwrap();
    let o = bin().args(["run", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.ris_elements"));

    let o = bin().args(["trace", "--scheme", "nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    // Every trial fails at runtime: the RIS sits on a device after the axis is applied.
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"experiment": {"axis": "y_ris", "values": [-25], "schemes": ["P2"]}, "system": {"geometry": {"d1": [0, -25], "d2": [25, -25], "ap1": [-25, 25], "ap2": [25, 25], "ris": [0, 0]}}}"#).unwrap();
    let o = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--trials", "1", "--out", dir.path().join("x").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
