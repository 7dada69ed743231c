//! End-to-end checks of the command-line binary: exit-code contract,
//! byte-identical reports across runs and thread counts, and the built-in
//! worked example.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use koopman_core::polyfield::quadratic_demo_system;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_koopman"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("koopman-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn demo_file(dir: &Path, a: f64) -> PathBuf {
    let path = dir.join("system.json");
    quadratic_demo_system(a).save_json(&path).unwrap();
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_passes_off_resonance_and_fails_on_resonance() {
    let dir = temp_dir("check");
    let sys = demo_file(&dir, 2.0);

    let ok = bin()
        .args(["check", "--system"])
        .arg(&sys)
        .args(["--u", "0.3", "--k", "4", "--out"])
        .arg(dir.join("check.json"))
        .output()
        .unwrap();
    assert!(ok.status.success(), "stderr: {}", stderr_of(&ok));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("check.json")).unwrap()).unwrap();
    assert_eq!(report["all_nonresonant"], serde_json::Value::Bool(true));

    // u = -1 makes the fast eigenvalue twice the slow one
    let bad = bin()
        .args(["check", "--system"])
        .arg(&sys)
        .args(["--u", "-1", "--k", "4", "--out"])
        .arg(dir.join("check-bad.json"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2), "stderr: {}", stderr_of(&bad));
    assert!(stderr_of(&bad).contains("condition-failed"));
}

#[test]
fn missing_system_file_is_a_plain_error() {
    let dir = temp_dir("missing");
    let out = bin()
        .args(["check", "--system"])
        .arg(dir.join("absent.json"))
        .args(["--out"])
        .arg(dir.join("check.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
}

#[test]
fn linearize_reports_are_byte_identical_across_runs_and_threads() {
    let dir = temp_dir("determinism");
    let sys = demo_file(&dir, 2.0);
    let mut bytes = Vec::new();
    for (name, threads) in [("a.json", None), ("b.json", None), ("c.json", Some("2"))] {
        let mut cmd = bin();
        cmd.args(["linearize", "--system"])
            .arg(&sys)
            .args(["--u", "0.3", "--k", "5", "--out"])
            .arg(dir.join(name));
        if let Some(t) = threads {
            cmd.env("KOOPMAN_THREADS", t);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        bytes.push(fs::read(dir.join(name)).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "two identical runs diverged");
    assert_eq!(bytes[0], bytes[2], "thread count changed the report");
}

#[test]
fn linearize_fails_with_exit_2_at_a_resonant_parameter() {
    let dir = temp_dir("resonant");
    let sys = demo_file(&dir, 2.0);
    let out = bin()
        .args(["linearize", "--system"])
        .arg(&sys)
        .args(["--u", "-1", "--out"])
        .arg(dir.join("map.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("resonant-denominator"));
}

#[test]
fn worked_example_passes_for_both_family_branches() {
    let dir = temp_dir("sec5");
    for a in ["1", "2"] {
        let out = bin()
            .args(["example-sec5", "--a", a, "--out"])
            .arg(dir.join(format!("sec5-{a}.json")))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "a={a} stderr: {}",
            stderr_of(&out)
        );
        assert!(dir.join(format!("sec5-{a}.json")).exists());
    }
}

#[test]
fn bilinearize_refuses_a_parameter_dependent_map() {
    let dir = temp_dir("bilinearize");
    let sys = demo_file(&dir, 2.0);
    let out = bin()
        .args(["bilinearize", "--system"])
        .arg(&sys)
        .args(["--out"])
        .arg(dir.join("model.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("certificate-not-isomorphic"));
}

#[test]
fn malformed_grid_is_rejected() {
    let dir = temp_dir("grid");
    let sys = demo_file(&dir, 2.0);
    let out = bin()
        .args(["resonance-scan", "--system"])
        .arg(&sys)
        .args(["--u-grid", "nonsense", "--out"])
        .arg(dir.join("scan.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!dir.join("scan.json").exists());
}

// A grid whose left endpoint is negative must parse in the space-separated
// form, not just as --u-grid=LO:HI:STEP.
#[test]
fn scan_accepts_a_negative_grid_endpoint_and_flags_the_resonances() {
    let dir = temp_dir("scan-neg");
    let sys = demo_file(&dir, 2.0);
    let out = bin()
        .args(["resonance-scan", "--system"])
        .arg(&sys)
        .args(["--u-grid", "-2.2:0.95:0.01", "--k", "4", "--out"])
        .arg(dir.join("scan.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("scan.json")).unwrap()).unwrap();
    let flagged: Vec<f64> = report["points"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["flagged"] == serde_json::Value::Bool(true))
        .map(|p| p["u"][0].as_f64().unwrap())
        .collect();
    assert_eq!(flagged.len(), 6, "flagged u values: {flagged:?}");
    for target in [-2.0, -1.0, 0.0, 0.5, 2.0 / 3.0, 0.75] {
        assert!(
            flagged.iter().any(|u| (u - target).abs() < 0.006),
            "no flag near u = {target}, flagged: {flagged:?}"
        );
    }
}

#[test]
fn simulate_writes_the_requested_grid() {
    let dir = temp_dir("simulate");
    let sys = demo_file(&dir, 2.0);
    let out = bin()
        .args(["simulate", "--system"])
        .arg(&sys)
        .args([
            "--x0",
            "0.5,0.2",
            "--u",
            "0.3",
            "--horizon",
            "2",
            "--grid-points",
            "41",
            "--out",
        ])
        .arg(dir.join("sim.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("sim.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2"));
    assert_eq!(lines.count(), 41);
}

#[test]
fn generator_fit_report_matches_the_model_dimensions() {
    let dir = temp_dir("gedmd");
    let sys = demo_file(&dir, 2.0);
    let out = bin()
        .args(["gedmd", "--system"])
        .arg(&sys)
        .args(["--u", "0.3", "--out"])
        .arg(dir.join("gedmd.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("gedmd.json")).unwrap()).unwrap();
    assert_eq!(report["matched"].as_array().unwrap().len(), 2);
    let rows = report["l"].as_array().unwrap();
    assert_eq!(rows.len(), 5, "degree-2 dictionary in two variables");
}
