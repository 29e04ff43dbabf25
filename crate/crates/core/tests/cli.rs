//! End-to-end runs of the `localizability` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 3

[network]
max_nodes = 8
max_distributed_nodes = 8

[scenario]
steps = 10

[montecarlo]
trials = 20
every = 5
table_trials = 3

[verify]
instances = 2
power_instances = 1
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_localizability")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

fn out_dir(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn inspection_run_writes_outputs_and_lowers_the_potential() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = out_dir(tmp.path(), "run");
    let o = bin(&["run", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["config.toml", "trace.csv", "potential.csv", "mse.csv", "summary.json"] {
        assert!(Path::new(&out).join(f).exists(), "missing {f}");
    }
    let s = read_json(Path::new(&out).join("summary.json"));
    assert_eq!(s["scenario"], "inspection");
    assert!(s["final_potential"].as_f64().unwrap() < s["initial_potential"].as_f64().unwrap());
    let steps: Vec<u64> = s["mse"].as_array().unwrap().iter().map(|e| e["step"].as_u64().unwrap()).collect();
    assert_eq!(steps, vec![0, 5, 10]);
    let potential = fs::read_to_string(Path::new(&out).join("potential.csv")).unwrap();
    assert_eq!(potential.lines().count(), 1 + 11);
}

#[test]
fn ugv_run_reports_the_constraint_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = out_dir(tmp.path(), "ugv");
    let o = bin(&["run", "--config", &cfg, "--scenario", "ugv", "--mode", "RP", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(Path::new(&out).join("summary.json"));
    assert_eq!(s["scenario"], "ugv");
    assert_eq!(s["mode"], "RP");
    assert!(s["final_constraint_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(s["mse"].as_array().unwrap().len(), 2);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let first = out_dir(tmp.path(), "first");
    assert_eq!(bin(&["run", "--config", &cfg, "--seed", "11", "--out", &first]).status.code(), Some(0));
    let echoed = Path::new(&first).join("config.toml").to_string_lossy().into_owned();
    let second = out_dir(tmp.path(), "second");
    let o = bin(&["run", "--config", &echoed, "--out", &second]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trace.csv", "potential.csv", "mse.csv", "summary.json"] {
        let a = fs::read(Path::new(&first).join(f)).unwrap();
        let b = fs::read(Path::new(&second).join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn invalid_values_are_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[noise]\nsigma = -1.0\n").unwrap();
    let o = bin(&["run", "--config", path.to_str().unwrap(), "--out", &out_dir(tmp.path(), "x")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("noise.sigma"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[scenario.ugv]\nwheel_radius = 0.2\n").unwrap();
    let o = bin(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario.ugv"), "{}", stderr(&o));
    assert!(stderr(&o).contains("wheel_radius"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_are_configuration_errors() {
    assert_eq!(bin(&["run", "--mode", "XY"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--config", "/nonexistent/config.toml"]).status.code(), Some(2));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_passes_for_several_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for seed in 1..=5u64 {
        let out = out_dir(tmp.path(), &format!("v{seed}"));
        let o = bin(&["verify", "--config", &cfg, "--seed", &seed.to_string(), "--out", &out]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(0), "seed {seed}:\n{stdout}\n{}", stderr(&o));
        let v = read_json(Path::new(&out).join("verify.json"));
        assert_eq!(v["passed"], true);
        assert_eq!(v["seed"], seed);
        let props = v["properties"].as_array().unwrap();
        assert!(props.len() >= 10);
        assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), props.len());
    }
}

#[test]
fn verify_catches_a_sign_flipped_gradient() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = out_dir(tmp.path(), "fault");
    let o = bin(&["verify", "--config", &cfg, "--fault", "sign-flip", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL gradient")), "{stdout}");
    let err = stderr(&o);
    assert!(err.contains("failing instance"), "{err}");
    let json_line = err.lines().find(|l| l.starts_with('{')).expect("instance JSON on stderr");
    let inst: Value = serde_json::from_str(json_line).unwrap();
    assert!(inst["points"].as_array().is_some_and(|p| !p.is_empty()));
    assert_eq!(read_json(Path::new(&out).join("verify.json"))["passed"], false);
}

#[test]
fn montecarlo_table_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let run = |name: &str| {
        let out = out_dir(tmp.path(), name);
        let o = bin(&["montecarlo", "--config", &cfg, "--scenario", "ugv", "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (fs::read(Path::new(&out).join("montecarlo.json")).unwrap(), out)
    };
    let (a, out) = run("m1");
    let (b, _) = run("m2");
    assert!(a == b, "montecarlo.json differs between runs");
    let t = read_json(Path::new(&out).join("montecarlo.json"));
    assert_eq!(t["trials"], 3);
    let labels: Vec<&str> = t["rows"].as_array().unwrap().iter().map(|r| r["label"].as_str().unwrap()).collect();
    assert_eq!(labels, vec!["D", "RP"]);
    let csv = fs::read_to_string(Path::new(&out).join("montecarlo.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
