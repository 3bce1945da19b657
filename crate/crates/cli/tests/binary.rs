use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

fn ncrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncrep")).args(args).env_remove("NCREP_TOL").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn suite(dir: &Path, tag: &str, extra: &[&str]) -> (Output, PathBuf) {
    let report = dir.join(format!("{tag}.json"));
    let mut args = vec!["suite", "all", "--report", report.to_str().unwrap()];
    args.extend_from_slice(extra);
    (ncrep(&args), report)
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn seed_42_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (out, report) = suite(dir.path(), "r", &["--seed", "42", "--n-max", "4", "--trials", "50"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let v = read_json(&report);
    assert_eq!(v["pass"], true);
    assert!(v["failures"].as_array().unwrap().is_empty());
    let assertions = v["assertions"].as_array().unwrap();
    assert!(assertions.len() > 30);
    assert!(assertions.iter().all(|a| a["pass"] == true && a["count"].as_u64().unwrap() > 0));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "9", "--n-max", "5", "--trials", "12"];
    let (a, pa) = suite(dir.path(), "a", &args);
    let (b, pb) = suite(dir.path(), "b", &args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    let (c, _) = suite(dir.path(), "c", &["--seed", "10", "--n-max", "5", "--trials", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn zero_trials_is_an_empty_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (out, report) = suite(dir.path(), "z", &["--trials", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&report);
    assert_eq!(v["pass"], true);
    assert!(v["assertions"].as_array().unwrap().is_empty());
}

#[test]
fn injected_fault_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["expectations", "hoffman-rossi", "jensen", "diagnosis"] {
        let report = dir.path().join(format!("{name}.json"));
        let out = ncrep(&["suite", name, "--trials", "6", "--inject-fault", "--report", report.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}: {}", stdout(&out));
        let v = read_json(&report);
        let failures = v["failures"].as_array().unwrap();
        assert!(!failures.is_empty());
        // Every failing instance was written and is itself a valid instance.
        for f in failures {
            let p = PathBuf::from(f["instance"].as_str().unwrap());
            ncrep::instance::load(&p).unwrap();
        }
    }
}

#[test]
fn input_errors_exit_2() {
    let bad = file("bad_character.json");
    let out = ncrep(&["diagnose", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiplicative"));
    let wrong = file("wrong_dimension_density.json");
    assert_eq!(ncrep(&["represent", wrong.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ncrep(&["diagnose", "/nonexistent/instance.json"]).status.code(), Some(2));
    assert_eq!(ncrep(&["suite", "all", "--n-max", "1"]).status.code(), Some(2));
    assert_eq!(ncrep(&["suite", "nonsense"]).status.code(), Some(2));
    let skew = file("skew_d2.json");
    assert_eq!(ncrep(&["represent", skew.to_str().unwrap()]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_ncrep"))
        .args(["suite", "all", "--trials", "1"])
        .env("NCREP_TOL", "abc")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_scale_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("t.json");
    let out = Command::new(env!("CARGO_BIN_EXE_ncrep"))
        .args(["suite", "expectations", "--trials", "2", "--report", report.to_str().unwrap()])
        .env("NCREP_TOL", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&report);
    assert_eq!(v["tolerance_scale"], 2.0);
    let pres =
        v["assertions"].as_array().unwrap().iter().find(|a| a["name"] == "expectations/preservation").unwrap().clone();
    assert_eq!(pres["tolerance"], 2e-8);
}

#[test]
fn diagnose_corner_state_gives_supported_ideal_expectation() {
    let out = ncrep(&["diagnose", file("m3_corner.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout(&out);
    assert!(s.contains("supported ideal expectation onto Dz"), "{s}");
    assert!(s.contains("range dimension 1"), "{s}");
    // E(E₃₃) = E₃₃ and no other matrix unit survives.
    assert!(s.contains("E_33 ->") && !s.contains("E_11 ->") && !s.contains("E_22 ->"), "{s}");
}

#[test]
fn diagnose_skew_state_reports_nonexistence() {
    let out = ncrep(&["diagnose", file("skew_d2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout(&out);
    assert!(s.contains("no expectation: D not ω-central"), "{s}");
}

#[test]
fn diagnose_tracial_instance_runs_the_pipeline() {
    let out = ncrep(&["diagnose", file("t2_d2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout(&out);
    assert!(s.contains("representing measure (tracial pipeline)"), "{s}");
    assert!(s.contains("PASS represent/extension"), "{s}");
}

#[test]
fn represent_and_jensen_on_the_canonical_instance() {
    let t2 = file("t2_d2.json");
    let out = ncrep(&["represent", t2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    // ρ = τ: the unique D₂-bimodule expectation on M₂ is the diagonal compression.
    assert!(stdout(&out).contains("[   0.50000   0.00000 ]"));
    let out = ncrep(&["jensen", t2.to_str().unwrap(), "--trials", "30", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("30 of 30 trials passed"));
}

#[test]
fn jensen_with_a_non_tracial_state_reports_failures() {
    let out = ncrep(&["jensen", file("t2_d2_state.json").to_str().unwrap(), "--trials", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("not a trace on M"));
}
