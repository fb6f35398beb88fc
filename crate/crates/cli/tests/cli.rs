use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nlslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlslab")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn profile_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = nlslab(&["profile", "--p", "3", "--alpha", "2", "--L", "40", "--N", "1024", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("profile.json"));
    assert!((summary["mass"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    let manifest = json(&out.join("manifest.json"));
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["profile.csv", "profile.json", "manifest.json"] {
        assert!(listed.contains(&name), "{listed:?}");
        assert!(out.join(name).exists());
    }
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,phi,phi_alpha");
    assert_eq!(csv.lines().count(), 1025);
}

#[test]
fn check_reports_bad_grid_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nhalf_width = 40.0\npoints = 15\n").unwrap();
    let o = nlslab(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid"));
}

#[test]
fn defaults_round_trip_through_check() {
    let o = nlslab(&["check", "--print-defaults"]);
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("defaults.toml");
    fs::write(&cfg, &o.stdout).unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    for section in ["[grid]", "[nonlinearity]", "[contour]", "[simulation]", "[tolerances]"] {
        assert!(text.contains(section), "{text}");
    }
    let o = nlslab(&["check", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_subcommand_exits_64() {
    let o = nlslab(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(!o.stderr.is_empty());
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Valid grid, but far too coarse for the profile resolution gate.
    let o = nlslab(&["profile", "--p", "3", "--L", "40", "--N", "32", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

const SHORT_RUN: &str = r#"
[grid]
half_width = 30.0
points = 512

[simulation]
h = 2.0
t_end = 22.0
dt = 0.002
sample_interval = 0.5

[simulation.perturbation]
amplitude = 0.001
seed = 3

[simulation.perturbation.shape]
shape = "gaussian_bump"
width = 1.0
"#;

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SHORT_RUN).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = nlslab(&["simulate", "--config", cfg.to_str().unwrap(), "--skip-verdict", "-o", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["trajectory.csv", "chi.csv", "result.json", "manifest.json"] {
        assert!(a.join(name).exists(), "{name}");
    }
    let ta = fs::read(a.join("trajectory.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("trajectory.csv")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,beta,omega,gamma,alpha,chi_inf,chi_l2,ortho_r1,ortho_r2,rate_bound,rate_measured,Msup"
    );
    let first_row = text.lines().nth(1).unwrap();
    assert!(first_row.split(',').all(|v| v.contains('e')));
}
