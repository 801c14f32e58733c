use std::process::Command;

use rr_cli::run::{config_hash, sha256_hex, MANIFEST_NAME};
use rr_cli::{execute, parse_scenario, Artifact, Manifest, RunOptions};
use serde_json::Value;

const CYCLOTRON: &str = r#"
[particle]
q = 0.1
sigma = 0.05
[field]
kind = "uniform_magnetic"
b = [0.0, 0.0, 5.0]
[integrator]
step = 0.0125
span = 5.0
[initial]
u = [0.5, 0.0, 0.0]
"#;

const ENSEMBLE: &str = r#"
mode = "ensemble"
seed = 3
[particle]
q = 0.05
sigma = 0.05
[field]
kind = "uniform_magnetic"
b = [0.0, 0.0, 10.0]
[self_force]
model = "ll"
[integrator]
step = 0.0125
[ensemble]
count = 20000
temperature = 0.1
drift = [0.3, 0.0, 0.0]
bins = 10
"#;

fn artifact<'a>(arts: &'a [Artifact], name: &str) -> &'a Artifact {
    arts.iter().find(|a| a.name == name).unwrap_or_else(|| panic!("no {name}"))
}

fn json(arts: &[Artifact], name: &str) -> Value {
    serde_json::from_slice(&artifact(arts, name).bytes).unwrap()
}

#[test]
fn manifest_hashes_every_artifact() {
    let s = parse_scenario(CYCLOTRON).unwrap();
    let arts = execute(&s, &RunOptions::default()).unwrap();
    let manifest: Manifest = serde_json::from_slice(&artifact(&arts, MANIFEST_NAME).bytes).unwrap();
    assert_eq!(manifest.schema_version, 1);
    assert_eq!(manifest.engine_version, rr_core::VERSION);
    assert_eq!(manifest.config_sha256, config_hash(&s).unwrap());
    assert_eq!(manifest.files.len(), arts.len() - 1);
    for f in &manifest.files {
        let a = artifact(&arts, &f.name);
        assert_eq!(f.sha256, sha256_hex(&a.bytes));
        assert_eq!(f.bytes, a.bytes.len());
    }
    let traj = std::str::from_utf8(&artifact(&arts, "trajectory.csv").bytes).unwrap();
    assert!(traj.starts_with("s,r0,r1,r2,r3,"));
    assert_eq!(traj.lines().count(), 401 + 1);
}

#[test]
fn sha256_matches_known_digest() {
    assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#[test]
fn single_runs_repeat_byte_for_byte() {
    let s = parse_scenario(CYCLOTRON).unwrap();
    assert_eq!(execute(&s, &RunOptions::default()).unwrap(), execute(&s, &RunOptions::default()).unwrap());
}

#[test]
fn ensemble_output_is_independent_of_thread_count() {
    let mut s = parse_scenario(ENSEMBLE).unwrap();
    s.threads = 1;
    let one = execute(&s, &RunOptions::default()).unwrap();
    s.threads = 4;
    let four = execute(&s, &RunOptions::default()).unwrap();
    for (a, b) in one.iter().zip(&four).filter(|(a, _)| a.name != MANIFEST_NAME) {
        assert!(a == b, "{} differs between thread counts", a.name);
    }
    let report = json(&one, "report.json");
    assert!(report["max_z_rms"].as_f64().unwrap() <= 3.0);
    assert!(report["residuals"]["min_particles_per_bin"].as_u64().unwrap() >= 500);
}

#[test]
fn seed_changes_ensemble_output() {
    let a = execute(&parse_scenario(ENSEMBLE).unwrap(), &RunOptions::default()).unwrap();
    let b = execute(&rr_cli::parse_scenario_with_seed(ENSEMBLE, Some(4)).unwrap(), &RunOptions::default()).unwrap();
    assert_ne!(artifact(&a, "ensemble.csv"), artifact(&b, "ensemble.csv"));
}

#[test]
fn sweep_reports_a_slope_per_model() {
    let text = "mode = \"sweep\"\n[particle]\nq = 1.0\nsigma = 0.04\n[sweep]\n[sweep.motion]\nkind = \"circular\"\nradius = 1.0\nomega = 0.5\n";
    let arts = execute(&parse_scenario(text).unwrap(), &RunOptions::default()).unwrap();
    let report = json(&arts, "report.json");
    let tables = report["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 2);
    for t in tables {
        let slope = t["slope"].as_f64().unwrap();
        assert!((0.8..=1.2).contains(&slope), "{slope}");
        assert_eq!(t["rows"].as_array().unwrap().len(), 4);
    }
    let csv = std::str::from_utf8(&artifact(&arts, "convergence.csv").bytes).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn liouville_reports_determinant_and_divergence() {
    let text = r#"
mode = "liouville"
[particle]
q = 0.05
sigma = 0.05
[field]
kind = "uniform_magnetic"
b = [0.0, 0.0, 10.0]
[self_force]
model = "ll"
[integrator]
step = 0.0125
span = 2.5
[initial]
u = [0.3, 0.0, 0.0]
[liouville]
delta = 1e-5
coordinates = "on_shell"
checkpoints = 2
"#;
    let arts = execute(&parse_scenario(text).unwrap(), &RunOptions::default()).unwrap();
    let series = &json(&arts, "report.json")["series"];
    let det = series["determinant"].as_array().unwrap();
    let div = series["divergence_integral"].as_array().unwrap();
    assert_eq!(det.len(), 2);
    assert_eq!(div.len(), 2);
    for (d, i) in det.iter().zip(div) {
        let (d, i) = (d.as_f64().unwrap(), i.as_f64().unwrap());
        assert!(((d.ln() - i) / i).abs() < 0.2);
    }
}

#[test]
fn pressureless_fluid_check_matches_particle() {
    let text = r#"
mode = "fluid-check"
[particle]
q = 0.3
sigma = 0.05
[field]
kind = "uniform_magnetic"
b = [0.0, 0.0, 1.0]
[fluid]
kind = "uniform"
u = [0.2, -0.1, 0.4]
density = 2.0
points = [[0.0, 0.0, 0.0, 0.0], [1.0, 2.0, 3.0, 4.0]]
"#;
    let arts = execute(&parse_scenario(text).unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(json(&arts, "report.json")["max_particle_gap"].as_f64(), Some(0.0));
    let csv = std::str::from_utf8(&artifact(&arts, "fluid.csv").bytes).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 10);
}

#[test]
fn engine_failures_surface_as_errors() {
    // Vacuum at the sample point.
    let text = r#"
mode = "fluid-check"
[particle]
q = 0.1
sigma = 0.05
[fluid]
kind = "isothermal"
temperature = 0.5
n0 = 1.0
gradient = [0.0, -1.0, 0.0, 0.0]
points = [[0.0, 2.0, 0.0, 0.0]]
"#;
    let err = execute(&parse_scenario(text).unwrap(), &RunOptions::default()).unwrap_err();
    assert_eq!(err.kind(), "engine");
    assert_eq!(err.exit_code(), 1);
}

fn rrsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rrsim")).args(args).output().unwrap()
}

#[test]
fn invalid_config_exits_nonzero_with_error_json() {
    let dir = std::env::temp_dir().join(format!("rrsim-invalid-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "[particle]\nq = 0.1\nsigma = 0.0\nm0 = 0.0\n").unwrap();
    let out = rrsim(&["run", path.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "validation");
    assert_eq!(err["error"]["errors"].as_array().unwrap().len(), 2);
    assert!(!dir.join("o").exists());

    let out = rrsim(&["validate", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn validate_counts_derived_sweep_scenarios() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/circular_sweep.toml");
    let out = rrsim(&["validate", path]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mode"], "sweep");
    assert_eq!(v["derived_scenarios"], 4);
}

#[test]
fn cli_run_writes_manifest_and_traces() {
    let dir = std::env::temp_dir().join(format!("rrsim-run-{}", std::process::id()));
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/fluid_check.toml");
    let out = rrsim(&["run", path, "--out", dir.to_str().unwrap(), "--trace", "--deterministic-reduce"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[trace]"));
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert!(manifest.deterministic_reduce);
    for f in &manifest.files {
        assert_eq!(sha256_hex(&std::fs::read(dir.join(&f.name)).unwrap()), f.sha256);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
