use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nonadiabat"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("NONADIABAT_THREADS", n),
        None => cmd.env_remove("NONADIABAT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_verb(verb: &str, file: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![verb, file.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args, None)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV written by the tool, keyed by the header line.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| if x.is_empty() { None } else { Some(x.parse().unwrap()) }).collect())
        .collect();
    (header, rows)
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

// Thermal qubit with ω = γ = n̄ = 1 relaxing from the maximally mixed state:
// p_e(t) = 1/3 + (1/6)e^(−3t), Ṡ_ex = (3p_e − 1) ln 2 and
// Ṡ_na = (3p_e − 1) ln(2p_e / (1 − p_e)).
fn excited_population(t: f64) -> f64 {
    1.0 / 3.0 + (1.0 / 6.0) * (-3.0 * t).exp()
}

#[test]
fn rates_follow_closed_form_qubit_relaxation() {
    let dir = TempDir::new().unwrap();
    let o = run_verb("rates", &scenario("qubit.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert!(text.starts_with("# nonadiabat rates v1"));
    let (header, rows) = read_csv(&dir.path().join("rates.csv"));
    assert_eq!(header, ["t", "S", "S_dot", "S_ex_relent", "S_ex_weights", "S_na", "equivalence_residual"]);
    assert!((rows[0][5].unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);
    let mut previous = f64::INFINITY;
    for row in &rows {
        let t = row[0].unwrap();
        let a = excited_population(t);
        let s_ex = (3.0 * a - 1.0) * 2f64.ln();
        let s_na = (3.0 * a - 1.0) * (2.0 * a / (1.0 - a)).ln();
        assert!((row[4].unwrap() - s_ex).abs() < 1e-9, "t = {t}");
        assert!((row[5].unwrap() - s_na).abs() < 1e-9, "t = {t}");
        assert!(row[5].unwrap() <= previous);
        previous = row[5].unwrap();
    }
    assert!(previous < 1e-9);
}

#[test]
fn equivalence_residual_is_reported_and_overridable() {
    let dir = TempDir::new().unwrap();
    let o = run_verb("equivalence", &scenario("qubit.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("equivalence.json"));
    let max = doc["equivalence"]["max_residual"].as_f64().unwrap();
    assert!(max <= 1e-9);
    assert_eq!(doc["equivalence"]["missing_weights"], 0);

    let o = run_verb("equivalence", &scenario("qubit.json"), dir.path(), &["--tol-override", "equivalence=0"]);
    if max > 0.0 {
        assert_eq!(o.status.code(), Some(2));
        assert!(dir.path().join("equivalence.json").exists());
    }
    let o = run_verb("equivalence", &scenario("qubit.json"), dir.path(), &["--tol-override", "bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn steady_state_and_propagation_match_qubit() {
    let dir = TempDir::new().unwrap();
    let o = run_verb("steady", &scenario("qubit.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("steady.json"));
    let eig: Vec<f64> = doc["states"][0]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((eig[0] - 1.0 / 3.0).abs() < 1e-12 && (eig[1] - 2.0 / 3.0).abs() < 1e-12);
    assert!((doc["states"][0]["pi"][0][0][0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let o = run_verb("propagate", &scenario("qubit.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("propagate.csv"));
    assert_eq!(&header[..4], ["t", "trace", "re_00", "im_00"]);
    assert_eq!(header.len(), 2 + 2 * 4);
    for row in &rows {
        let t = row[0].unwrap();
        assert!((row[2].unwrap() - excited_population(t)).abs() < 1e-10, "t = {t}");
        assert!((row[1].unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn privileged_violation_exits_two_and_names_commutator() {
    let dir = TempDir::new().unwrap();
    let o = run_verb("validate", &scenario("transverse_drive.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("[H, pi]"), "{err}");
    assert!(err.contains("modular: commutator"), "{err}");
    let doc = read_json(&dir.path().join("consistency.json"));
    assert_eq!(doc["passed"], false);
    assert_eq!(doc["reports"][0]["privileged.pass"], false);
    assert_eq!(doc["reports"][0]["time_reversal.status"], "pass");
}

#[test]
fn bundled_consistent_scenarios_validate() {
    for name in ["qubit.json", "qubit_ramp.json", "kraus_thermal.json"] {
        let dir = TempDir::new().unwrap();
        let o = run_verb("validate", &scenario(name), dir.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert_eq!(read_json(&dir.path().join("consistency.json"))["passed"], true);
    }
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let empty = write_scenario(dir.path(), "empty.json", "");
    let o = run_verb("validate", &empty, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parse error at line 1"), "{}", stderr(&o));

    let qubit = fs::read_to_string(scenario("qubit.json")).unwrap();
    let unresolved = write_scenario(
        dir.path(),
        "unresolved.json",
        &qubit.replace("\"amplitude\": 1.0,", "\"amplitude_channel\": \"kappa\","),
    );
    let o = run_verb("validate", &unresolved, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("jumps[1].amplitude_channel: unresolved reference `kappa`"), "{}", stderr(&o));

    let version = write_scenario(dir.path(), "version.json", &qubit.replace("\"schema_version\": 1", "\"schema_version\": 2"));
    let o = run_verb("validate", &version, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema version 2"), "{}", stderr(&o));

    let unknown = write_scenario(dir.path(), "unknown.json", &qubit.replace("\"dim\": 2,", "\"dim\": 2,\n  \"spin\": 1,"));
    let o = run_verb("validate", &unknown, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field `spin`"), "{}", stderr(&o));

    let o = run_verb("kraus-audit", &scenario("qubit.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["frobnicate", scenario("qubit.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["validate", scenario("qubit.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
}

#[test]
fn kraus_audit_recovers_scaling_factors() {
    let dir = TempDir::new().unwrap();
    let o = run_verb("kraus-audit", &scenario("kraus_thermal.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("kraus_audit.json"));
    let audit = &doc["audit"];
    // π = diag(1/3, 2/3): diagonal operator μ = 1, upward jump π₁/π₀ = 2, downward 1/2.
    let mu: Vec<f64> = audit["mu"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (got, want) in mu.iter().zip([1.0, 2.0, 0.5]) {
        assert!((got - want).abs() < 1e-12, "{mu:?}");
    }
    assert_eq!(audit["dual"]["is_cptp"], true);
    assert!(audit["max_delta_d"].as_f64().unwrap() <= 0.0);
    assert_eq!(audit["errors"].as_array().unwrap().len(), 0);
}

#[test]
fn kraus_audit_without_full_rank_fixed_point_exits_two() {
    let dir = TempDir::new().unwrap();
    // Amplitude damping with γ = 0.36 relaxes to the pure state |0⟩⟨0|.
    let text = r#"{
        "schema_version": 1, "kind": "kraus", "dim": 2,
        "kraus": [
            [[[1, 0], [0, 0]], [[0, 0], [0.8, 0]]],
            [[[0, 0], [0.6, 0]], [[0, 0], [0, 0]]]
        ]
    }"#;
    let path = write_scenario(dir.path(), "damping.json", text);
    let o = run_verb("kraus-audit", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let doc = read_json(&dir.path().join("kraus_audit.json"));
    assert_eq!(doc["passed"], false);
    assert!(!doc["audit"]["errors"].as_array().unwrap().is_empty());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let file = scenario("qubit_ramp.json");
    let args = |out: &Path| {
        vec![
            "trajectories".to_string(),
            file.to_str().unwrap().to_string(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
            "--ntraj".into(),
            "300".into(),
            "--seed".into(),
            "11".into(),
            "--event-log".into(),
        ]
    };
    let args_a = args(a.path());
    let args_b = args(b.path());
    let oa = run(&args_a.iter().map(String::as_str).collect::<Vec<_>>(), Some("1"));
    let ob = run(&args_b.iter().map(String::as_str).collect::<Vec<_>>(), Some("3"));
    assert!(oa.status.code().is_some_and(|c| c != 1), "{}", stderr(&oa));
    assert_eq!(oa.status.code(), ob.status.code());
    for name in ["ensemble.json", "events.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let doc = read_json(&a.path().join("ensemble.json"));
    assert_eq!(doc["n_traj"], 300);
    assert_eq!(doc["base_seed"], 11);

    for dir in [&a, &b] {
        let o = run_verb("rates", &file, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(a.path().join("rates.csv")).unwrap(), fs::read(b.path().join("rates.csv")).unwrap());
}

#[test]
fn event_log_weights_match_declared_entropy_flow() {
    let dir = TempDir::new().unwrap();
    let o = run_verb("trajectories", &scenario("qubit.json"), dir.path(), &["--ntraj", "50", "--event-log"]);
    assert!(o.status.code().is_some_and(|c| c != 1), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("events.csv"));
    assert_eq!(header, ["traj", "t", "k", "ln_w"]);
    assert!(!rows.is_empty());
    for row in rows {
        let sign = if row[2].unwrap() == 0.0 { 1.0 } else { -1.0 };
        assert!((row[3].unwrap() - sign * 2f64.ln()).abs() < 1e-12);
    }
}
