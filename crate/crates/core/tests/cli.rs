use std::fs;
use std::process::{Command, Output};

fn mfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn margins_text_and_json() {
    let o = mfc(&["margins", "--controller", "ipi", "--kp", "1", "--ki", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("51.827292"), "{}", stdout(&o));

    let o = mfc(&["margins", "--controller", "ip", "--kp", "2", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["phase_margin_deg"], 90.0);
    assert_eq!(v["gain_margin"], "inf");
}

#[test]
fn delayed_margins_use_the_sweep() {
    let o = mfc(&["margins", "--controller", "ip", "--kp", "1", "--delay", "0.5", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pm = v["phase_margin_deg"].as_f64().unwrap();
    assert!((pm - (90.0 - 0.5f64.to_degrees())).abs() < 1e-6, "{pm}");
}

#[test]
fn delay_margin_prints_tau_max() {
    let o = mfc(&["delay-margin", "--kp", "1", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tau_max"], std::f64::consts::FRAC_PI_2);
}

#[test]
fn validation_errors_exit_with_2() {
    for args in [
        &["margins", "--controller", "ipi", "--kp", "1"][..],
        &["margins", "--controller", "ip", "--kp", "-1"],
        &["delay-margin", "--kp", "0"],
        &["reproduce", "fig7"],
        &["margins", "--controller", "pid", "--kp", "1"],
    ] {
        let o = mfc(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn io_errors_exit_with_3() {
    let o = mfc(&["simulate", "--scenario", "/nonexistent/run.scn"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn nyquist_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ip.csv");
    let svg = dir.path().join("ip.svg");
    let o = mfc(&[
        "nyquist",
        "--controller",
        "ip",
        "--kp",
        "1",
        "--omega-min",
        "0.1",
        "--omega-max",
        "10",
        "--points",
        "3",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "omega,re,im,gain_db,phase_deg");
    assert_eq!(lines.len(), 4);
    for row in &lines[1..] {
        assert_eq!(row.split(',').nth(4), Some("-90"));
    }
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn simulate_writes_trace_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("short.scn");
    fs::write(
        &scn,
        "plant = linear\ncontroller = ip\nkp = 1\nsample_period = 0.01\nestimator_window = 0.05\nduration = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = mfc(&["simulate", "--scenario", scn.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("short.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(out.join("short.svg").exists());
}

#[test]
fn malformed_scenario_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    fs::write(&scn, "plant = linear\ncontroller = ip\n").unwrap();
    let o = mfc(&["simulate", "--scenario", scn.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kp") && err.contains("duration"), "{err}");
}

#[test]
fn sweep_delay_reports_the_boundary() {
    let o = mfc(&[
        "sweep-delay", "--kp", "1", "--tau-min", "1.4", "--tau-max", "1.8", "--step", "0.1", "--sequential",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("tau,stable,tracking_rmse\n"));
    assert!(text.contains("1.400000,true,"), "{text}");
    assert!(text.contains("1.800000,false,"), "{text}");
    assert!(text.contains("analytic delay margin: 1.570796 s"));
}
