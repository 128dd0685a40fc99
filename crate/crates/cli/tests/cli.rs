use std::path::{Path, PathBuf};
use std::process::Command;

use geoflow_cli::{run_experiment, ExperimentConfig, ExperimentKind, Status};
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn geoflow(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_geoflow")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn classify_inner_equator_is_hyperbolic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("classify_torus.toml");
    let (code, err) = geoflow(&["classify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let r = report(&out);
    let inner = &r["result"]["orbits"][0];
    assert_eq!(inner["kind"], "Hyperbolic");
    let want = 2.0 * std::f64::consts::TAU.cosh();
    let got = inner["trace"].as_f64().unwrap();
    assert!(((got - want) / want).abs() < 1e-3, "trace {got}");
    assert_eq!(r["result"]["orbits"][1]["kind"], "EllipticIrrational");
    assert!(out.join("run_meta.json").exists());
    assert!(out.join("orbit-0.svg").exists());
}

#[test]
fn negative_tolerance_is_a_config_error_with_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[metric]
family = "flat_torus"

[flow]
step = 0.0025
tol = -1e-12
max_newton_iters = 20

[find_periodic]
orbits = [{ x = [0.5, 1.0], p = [1.0, 0.0], period = 6.283185307179586 }]
"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = geoflow(&["find-periodic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[metric]
family = "flat_torus"
colour = "blue"

[find_periodic]
orbits = [{ x = [0.5, 1.0], p = [1.0, 0.0], period = 6.283185307179586 }]
"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = geoflow(&["find-periodic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn kind_must_match_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("twist_ladder.toml");
    let out = tmp.path().join("out");
    let (code, _) = geoflow(&["classify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn twist_ladder_certificate_is_not_shadowed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("twist_ladder.toml");
    let (code, err) = geoflow(&["twist-demo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["conclusion"], "not-shadowed-at-resolution");
    // r-profile climbs monotonically with one marker per logged jump
    let dump = std::fs::read_to_string(out.join("pseudo_orbit.csv")).unwrap();
    let rows: Vec<Vec<&str>> = dump.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let r: Vec<f64> = rows.iter().map(|c| c[2].parse().unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] >= w[0]));
    let jumps = rows.iter().filter(|c| !c[3].is_empty()).count();
    assert_eq!(jumps as u64, report(&out)["result"]["pseudo_orbit"]["jumps"].as_u64().unwrap());
}

#[test]
fn reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_path(&configs().join("integrate_torus.toml")).unwrap();
    cfg.integrate.as_mut().unwrap().t_end = 20.0;
    let (a, _) = run_experiment(ExperimentKind::Integrate, &cfg, &tmp.path().join("a")).unwrap();
    run_experiment(ExperimentKind::Integrate, &cfg, &tmp.path().join("b")).unwrap();
    assert_eq!(a.status, Status::Ok);
    for f in ["report.json", "trajectory_2.csv", "poincare-section.svg"] {
        let x = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    // a different seed draws different random states
    cfg.seed += 1;
    run_experiment(ExperimentKind::Integrate, &cfg, &tmp.path().join("c")).unwrap();
    assert_ne!(
        std::fs::read(tmp.path().join("a/trajectory_2.csv")).unwrap(),
        std::fs::read(tmp.path().join("c/trajectory_2.csv")).unwrap()
    );
}

#[test]
fn poincare_scatter_has_section_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_path(&configs().join("integrate_torus.toml")).unwrap();
    let c = cfg.integrate.as_mut().unwrap();
    c.t_end = 50.0;
    c.random_states = 0;
    run_experiment(ExperimentKind::Integrate, &cfg, tmp.path()).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("poincare-section.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,p_u"));
    // Clairaut: p_u is the same at every crossing
    let pu: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(pu.len() > 2);
    assert!(pu.iter().all(|p| (p - pu[0]).abs() < 1e-10));
}

#[test]
fn trace_sweep_csv_is_two_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_path(&configs().join("perturb_trace.toml")).unwrap();
    cfg.perturb_trace.as_mut().unwrap().range = Some(geoflow_cli::config::AmplitudeRange {
        from: -0.004,
        to: 0.004,
        step: 0.002,
    });
    cfg.plots = Some(vec!["trace-sweep".into(), "no-such-series".into()]);
    let (r, _) = run_experiment(ExperimentKind::PerturbTrace, &cfg, tmp.path()).unwrap();
    assert_eq!(r.warnings.len(), 1);
    let text = std::fs::read_to_string(tmp.path().join("trace-sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "amplitude,trace");
    assert_eq!(lines.len(), 6);
    assert!(r.result["covers_base"].as_bool().unwrap());
    let full = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(full.lines().next(), Some("amplitude,c2_size,trace"));
}

#[test]
fn starved_search_exits_inconclusive() {
    let tmp = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(configs().join("chain_test_inner.toml")).unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{base}\n[chain_test.budget]\nmax_evaluations = 1\n"),
    );
    let out = tmp.path().join("out");
    let (code, err) = geoflow(&["chain-test", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
    let r = report(&out);
    assert_eq!(r["status"], "inconclusive");
    assert_eq!(r["result"]["verdict"], "inconclusive");
}

#[test]
fn positive_control_chain_is_found() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_path(&configs().join("chain_test_inner.toml")).unwrap();
    let (r, _) = run_experiment(ExperimentKind::ChainTest, &cfg, tmp.path()).unwrap();
    assert_eq!(r.status, Status::Ok);
    assert_eq!(r.result["verdict"], "found");
    assert!(r.result["validation"]["valid"].as_bool().unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("twist_ladder.toml");
    let (code, _) = geoflow(&[
        "twist-demo",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "42",
        "--threads",
        "1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(report(&out)["seed"], 42);
}

#[test]
fn runs_leave_config_and_other_outputs_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("twist_ladder.toml")).unwrap();
    let cfg = write_config(tmp.path(), &text);
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let args = |out: &Path| {
        geoflow(&["twist-demo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0
    };
    assert_eq!(args(&first), 0);
    let before = std::fs::read(first.join("certificate.json")).unwrap();
    assert_eq!(args(&second), 0);
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), text);
    assert_eq!(std::fs::read(first.join("certificate.json")).unwrap(), before);
}
