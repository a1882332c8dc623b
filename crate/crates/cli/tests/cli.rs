use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn expsplit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expsplit"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const LINEAR_HEAT: &str = r#"
[problem]
kind = "heat-torus"
n = 64
v = { kind = "lebesgue", r = 2.0 }

[initial]
kind = "trig"
terms = [{ amp = 1.0, k = [1] }, { amp = 0.3, k = [5], phase = 0.5 }]

[scheme]
s = 2

[run]
horizon = 0.5
steps = 10
"#;

const LINEAR_WAVE: &str = r#"
[problem]
kind = "wave-dirichlet"
n = 64

[initial]
kind = "wave-modes"
displacement = [[1, 1.0], [3, 0.2]]
velocity = [[2, 0.5]]

[run]
horizon = 10.0
steps = 10
"#;

fn summary(dir: &Path, id: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("out").join(format!("{id}-summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn list_contains_shipped_problems() {
    let dir = tempfile::tempdir().unwrap();
    let o = expsplit(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for id in ["heat-torus-1d", "ou-1d", "wave-dirichlet-1d", "heat-cubic-s2"] {
        assert!(text.contains(id), "{id} missing");
    }
    let o = expsplit(&["list", "--format", "structured"], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ids: Vec<&str> = doc.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), text.lines().count() - 1);
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn linear_run_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("lin.toml"), LINEAR_HEAT).unwrap();
    let o = expsplit(&["run", "--config", "lin.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "heat-torus-1d");
    assert!(s["linear_error"].as_f64().unwrap() <= 1e-11);
    let traj = fs::read_to_string(dir.path().join("out/heat-torus-1d-trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 12);
}

#[test]
fn linear_wave_conserves_modal_energy() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("wave.toml"), LINEAR_WAVE).unwrap();
    let o = expsplit(&["run", "--config", "wave.toml", "--format", "structured"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path(), "wave-dirichlet-1d");
    assert!(s["modal_energy_drift"].as_f64().unwrap() < 1e-10);
    assert!(dir.path().join("out/wave-dirichlet-1d-trajectory.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = expsplit(&["run", "--id", "heat-torus-1d", "--h", "0.25"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kappa") && err.contains("C_ell"), "{err}");

    let o = expsplit(&["run", "--id", "heat-torus-1d", "--h", "0.3"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    fs::write(
        dir.path().join("strip.toml"),
        registry_text("heat-torus-1d").replace("seed = 0", "seed = 0\nstrip_check = true\nstrip_fraction = 1e-9"),
    )
    .unwrap();
    let o = expsplit(&["run", "--config", "strip.toml"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(
        dir.path().join("div.toml"),
        registry_text("heat-torus-1d").replace("seed = 0", "seed = 0\nfp_max_iter = 1"),
    )
    .unwrap();
    let o = expsplit(&["run", "--config", "div.toml"], dir.path());
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));

    let o = expsplit(&["run", "--id", "no-such-problem"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

fn registry_text(id: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/configs/{id}.toml"));
    fs::read_to_string(path).unwrap()
}

#[test]
fn study_with_bad_step_sizes_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = registry_text("heat-cubic-s2").replace(
        "h = [0.025, 0.0125, 0.00625, 0.003125, 0.0015625]",
        "h = [0.03, 0.015]",
    );
    fs::write(dir.path().join("bad.toml"), text).unwrap();
    let o = expsplit(&["convergence", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn convergence_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = expsplit(&["convergence", "--id", "heat-cubic-s1", "--jobs", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("heat-cubic-s1: PASS"));
    let csv = fs::read(dir.path().join("out/heat-cubic-s1.csv")).unwrap();
    let json = fs::read(dir.path().join("out/heat-cubic-s1.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&json).unwrap();
    let m = doc["median_eoc"].as_f64().unwrap();
    assert!((0.85..=1.15).contains(&m));

    let o = expsplit(&["convergence", "--id", "heat-cubic-s1", "--jobs", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv, fs::read(dir.path().join("out/heat-cubic-s1.csv")).unwrap());
    assert_eq!(json, fs::read(dir.path().join("out/heat-cubic-s1.json")).unwrap());
}

#[test]
fn failed_study_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let text = registry_text("heat-cubic-s1").replace("order_window = [0.85, 1.15]", "order_window = [1.7, 2.3]");
    fs::write(dir.path().join("wrong.toml"), text).unwrap();
    let o = expsplit(&["convergence", "--config", "wrong.toml"], dir.path());
    assert_eq!(o.status.code(), Some(6));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn smoothing_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let slope = |p: &str, r: &str| {
        let o = expsplit(
            &["smoothing", "--id", "heat-torus-1d", "--grid", "1024", "--p", p, "--r", r, "--t-min", "1e-4", "--t-max", "1e-2"],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        let line = stdout(&o).lines().find(|l| l.starts_with("fitted slope")).unwrap().to_string();
        line.trim_start_matches("fitted slope ").parse::<f64>().unwrap()
    };
    assert!((slope("1", "2") + 0.25).abs() < 0.05);
    assert!(slope("2", "2").abs() < 0.05);

    let o = expsplit(
        &["smoothing", "--id", "heat-torus-1d", "--p", "1", "--r", "2", "--t-min", "1e-5", "--t-max", "0.2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("under-resolved rows excluded"));
    let csv = fs::read_to_string(dir.path().join("out/heat-torus-1d-smoothing.csv")).unwrap();
    assert!(csv.contains(",false,"));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = expsplit(&["selftest"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn run_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |d: &Path| {
        (
            fs::read(d.join("out/ou-1d-summary.json")).unwrap(),
            fs::read(d.join("out/ou-1d-trajectory.csv")).unwrap(),
        )
    };
    assert_eq!(expsplit(&["run", "--id", "ou-1d", "--seed", "5"], dir.path()).status.code(), Some(0));
    let first = read(dir.path());
    assert_eq!(expsplit(&["run", "--id", "ou-1d", "--seed", "5"], dir.path()).status.code(), Some(0));
    assert_eq!(first, read(dir.path()));
    let s = summary(dir.path(), "ou-1d");
    assert_eq!(s["seed"].as_u64(), Some(5));
}
