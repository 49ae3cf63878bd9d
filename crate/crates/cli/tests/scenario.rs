//! Scenario runner behaviour: artifact determinism, exit codes, config
//! validation and the plot-data export schemas.

use std::fs;
use std::path::{Path, PathBuf};

use lightcone_cli::runner::{export_plotdata, run_scenario, Overrides};

fn workspace_scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lightcone_test_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn no_overrides() -> Overrides {
    Overrides { seed: None, step: None, tol_scale: None }
}

/// Small, fast scenario used by the behavioural tests.
fn small_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("small.scenario");
    fs::write(
        &path,
        "\
name = small
manifold.dim = 2
metric.kind = randers
metric.a = 1, 0 ; 0, 1
metric.b = 0.25 * sin(t), 0
integrator.step = 5e-3
seed = 3
grid.times = 2
grid.points = 2
grid.directions = 256
geodesics.rays = 2
probe.rays = 4
probe.horizon = 1
tol.roundtrip_slice = 5e-3
tol.roundtrip_g = 5e-3
tasks = geodesics, roundtrip, positivity, skies, probe
",
    )
    .unwrap();
    path
}

#[test]
fn same_seed_gives_identical_artifact_bytes() {
    let dir = temp_dir("determinism");
    let scenario = small_scenario(&dir);
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    let r1 = run_scenario(&scenario, Some(&out1), &no_overrides());
    let r2 = run_scenario(&scenario, Some(&out2), &no_overrides());
    assert_eq!(r1.exit_code, 0, "{:?}", r1.messages);
    assert_eq!(r2.exit_code, 0);
    assert_eq!(r1.artifacts.len(), 5);
    for (a, b) in r1.artifacts.iter().zip(&r2.artifacts) {
        let ba = fs::read(a).unwrap();
        let bb = fs::read(b).unwrap();
        assert_eq!(ba, bb, "artifact bytes differ: {}", a.display());
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn different_seed_changes_sampled_data() {
    let dir = temp_dir("seeding");
    let scenario = small_scenario(&dir);
    let out1 = dir.join("s1");
    let out2 = dir.join("s2");
    run_scenario(&scenario, Some(&out1), &no_overrides());
    run_scenario(
        &scenario,
        Some(&out2),
        &Overrides { seed: Some(12345), step: None, tol_scale: None },
    );
    let a = fs::read(out1.join("geodesics.json")).unwrap();
    let b = fs::read(out2.json_path("geodesics")).unwrap();
    assert_ne!(a, b);
    let _ = fs::remove_dir_all(&dir);
}

trait JsonPath {
    fn json_path(&self, task: &str) -> PathBuf;
}

impl JsonPath for PathBuf {
    fn json_path(&self, task: &str) -> PathBuf {
        self.join(format!("{task}.json"))
    }
}

#[test]
fn step_override_is_recorded_in_artifacts() {
    let dir = temp_dir("step_override");
    let scenario = small_scenario(&dir);
    let out = dir.join("out");
    let r = run_scenario(
        &scenario,
        Some(&out),
        &Overrides { seed: None, step: Some(2e-3), tol_scale: None },
    );
    assert_eq!(r.exit_code, 0, "{:?}", r.messages);
    let text = fs::read_to_string(out.join("geodesics.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["step"].as_f64().unwrap(), 2e-3);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn inadmissible_randers_is_a_config_error() {
    let dir = temp_dir("admissibility");
    let path = dir.join("bad.scenario");
    fs::write(
        &path,
        "name = bad\nmanifold.dim = 2\nmetric.kind = randers\nmetric.b = 1.1, 0\ntasks = positivity\n",
    )
    .unwrap();
    let out = run_scenario(&path, Some(&dir.join("out")), &no_overrides());
    assert_eq!(out.exit_code, 2, "{:?}", out.messages);
    assert!(
        out.messages.iter().any(|m| m.contains("admissibility")),
        "{:?}",
        out.messages
    );
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn parse_error_reports_line_and_column() {
    let dir = temp_dir("parse");
    let path = dir.join("broken.scenario");
    fs::write(&path, "name = x\nmetric.kind = euclidean\nwhat is this\n").unwrap();
    let out = run_scenario(&path, Some(&dir.join("out")), &no_overrides());
    assert_eq!(out.exit_code, 2);
    assert!(out.messages[0].contains("3:"), "{:?}", out.messages);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn tolerance_failure_exits_one_with_summary() {
    let dir = temp_dir("gates");
    let scenario = small_scenario(&dir);
    // Tighten tolerances far beyond reach.
    let out = run_scenario(
        &scenario,
        Some(&dir.join("out")),
        &Overrides { seed: None, step: None, tol_scale: Some(1e-12) },
    );
    assert_eq!(out.exit_code, 1);
    assert!(out.messages.iter().any(|m| m.contains("failing check")), "{:?}", out.messages);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn export_produces_documented_headers() {
    let dir = temp_dir("export");
    let scenario = small_scenario(&dir);
    let out = dir.join("artifacts");
    let r = run_scenario(&scenario, Some(&out), &no_overrides());
    assert_eq!(r.exit_code, 0);
    let produced = export_plotdata(&out).unwrap();
    assert!(produced.len() >= 4);

    let geo = fs::read_to_string(out.join("plot_geodesics.csv")).unwrap();
    assert!(geo.starts_with("t,x,y,null_residual\n"));
    let pos = fs::read_to_string(out.join("plot_positivity.csv")).unwrap();
    assert!(pos.starts_with("t,ray,margin\n"));
    let rt = fs::read_to_string(out.join("plot_roundtrip.csv")).unwrap();
    assert!(rt.starts_with("t,x,y,hausdorff,g_error\n"));
    let skies = fs::read_to_string(out.join("plot_skies.csv")).unwrap();
    assert!(skies.starts_with("s,ray,margin\n"));
    // Only '\n' line endings, decimal points everywhere.
    assert!(!geo.contains('\r'));

    // Export twice: byte-stable.
    let again = export_plotdata(&out).unwrap();
    assert_eq!(produced.len(), again.len());
    let geo2 = fs::read_to_string(out.join("plot_geodesics.csv")).unwrap();
    assert_eq!(geo, geo2);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn export_of_empty_dir_fails() {
    let dir = temp_dir("export_empty");
    assert!(export_plotdata(&dir).is_err());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn shipped_scenarios_parse() {
    for name in [
        "minkowski.scenario",
        "randers_wave.scenario",
        "riemannian_anisotropic.scenario",
        "torus_drift.scenario",
        "petal_probe.scenario",
    ] {
        let text = fs::read_to_string(workspace_scenario(name)).unwrap();
        let sc = lightcone_cli::config::Scenario::parse(&text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        // Canonical serialization reparses to a fixpoint.
        let canon = sc.to_config();
        let back = lightcone_cli::config::Scenario::parse(&canon).unwrap();
        assert_eq!(back.to_config(), canon, "{name} round-trip");
    }
}
