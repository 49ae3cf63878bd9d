//! Scenario runner and plot-data exporter.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Scenario, Task};
use crate::tasks::{build, run_task, TaskReport};

/// Exit status of a scenario run: 0 all gates pass, 1 gate failure,
/// 2 configuration error.
pub struct RunOutcome {
    pub exit_code: i32,
    pub messages: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub tol_scale: Option<f64>,
}

pub fn default_out_root() -> PathBuf {
    std::env::var_os("LIGHTCONE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("lightcone_out"))
}

pub fn run_scenario(
    scenario_path: &Path,
    out_dir: Option<&Path>,
    overrides: &Overrides,
) -> RunOutcome {
    let mut messages = Vec::new();
    let text = match fs::read_to_string(scenario_path) {
        Ok(t) => t,
        Err(e) => {
            return RunOutcome {
                exit_code: 2,
                messages: vec![format!("cannot read {}: {e}", scenario_path.display())],
                artifacts: vec![],
            }
        }
    };
    let mut scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            return RunOutcome {
                exit_code: 2,
                messages: vec![format!("{}:{}", scenario_path.display(), e)],
                artifacts: vec![],
            }
        }
    };
    if let Some(seed) = overrides.seed {
        scenario.seed = seed;
    }
    if let Some(step) = overrides.step {
        scenario.step = step;
    }
    if let Some(s) = overrides.tol_scale {
        scenario.tol_scale = s;
    }

    let built = match build(scenario) {
        Ok(b) => b,
        Err(e) => {
            return RunOutcome {
                exit_code: 2,
                messages: vec![format!("scenario invalid: {e}")],
                artifacts: vec![],
            }
        }
    };

    let out = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_out_root().join(&built.scenario.name));
    if let Err(e) = fs::create_dir_all(&out) {
        return RunOutcome {
            exit_code: 1,
            messages: vec![format!("cannot create {}: {e}", out.display())],
            artifacts: vec![],
        };
    }

    let mut all_pass = true;
    let mut artifacts = Vec::new();
    for task in built.scenario.tasks.clone() {
        let report = match run_task(&built, task) {
            Ok(r) => r,
            Err(e) => {
                return RunOutcome {
                    exit_code: 1,
                    messages: vec![format!("task {} failed: {e}", task.name())],
                    artifacts,
                }
            }
        };
        let path = out.join(format!("{}.json", task.name()));
        let bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        if let Err(e) = fs::write(&path, bytes) {
            return RunOutcome {
                exit_code: 1,
                messages: vec![format!("cannot write {}: {e}", path.display())],
                artifacts,
            };
        }
        let verdict = if report.pass { "PASS" } else { "FAIL" };
        messages.push(format!("[{verdict}] {} ({})", task.name(), gate_summary(&report)));
        if !report.pass {
            all_pass = false;
            for g in report.gates.iter().filter(|g| !g.pass) {
                messages.push(format!(
                    "       failing check: {} = {:.3e} (required {} {:.3e})",
                    g.name, g.value, g.relation, g.threshold
                ));
            }
        }
        artifacts.push(path);
    }
    RunOutcome { exit_code: if all_pass { 0 } else { 1 }, messages, artifacts }
}

fn gate_summary(report: &TaskReport) -> String {
    report
        .gates
        .iter()
        .map(|g| format!("{}={:.2e}", g.name, g.value))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Derive the plot-ready CSV bundle from a run's artifact directory.
/// CSV conventions: '.' decimal separator, '\n' line ends, mandatory
/// header row; bytes are stable for a fixed seed.
pub fn export_plotdata(artifact_dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut produced = Vec::new();
    let read = |task: Task| -> Option<TaskReport> {
        let path = artifact_dir.join(format!("{}.json", task.name()));
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    };

    if let Some(report) = read(Task::Geodesics) {
        let mut csv = String::from("t,x,y,null_residual\n");
        if let Some(rays) = report.data.get("rays").and_then(|v| v.as_array()) {
            for ray in rays {
                if let Some(samples) = ray.get("samples").and_then(|v| v.as_array()) {
                    for s in samples {
                        let row = s.as_array().unwrap();
                        // Row layout: t, p1..pn, residual.
                        let t = row[0].as_f64().unwrap();
                        let x = row[1].as_f64().unwrap();
                        let y = if row.len() > 3 { row[2].as_f64().unwrap() } else { 0.0 };
                        let r = row[row.len() - 1].as_f64().unwrap();
                        csv.push_str(&format!("{t},{x},{y},{r}\n"));
                    }
                }
            }
        }
        produced.push(write_csv(artifact_dir, "plot_geodesics.csv", &csv)?);
    }
    if let Some(report) = read(Task::Positivity) {
        let mut csv = String::from("t,ray,margin\n");
        if let Some(rows) = report.data.get("rows").and_then(|v| v.as_array()) {
            for r in rows {
                let row = r.as_array().unwrap();
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row[0].as_f64().unwrap(),
                    row[1].as_u64().unwrap(),
                    row[2].as_f64().unwrap()
                ));
            }
        }
        produced.push(write_csv(artifact_dir, "plot_positivity.csv", &csv)?);
    }
    if let Some(report) = read(Task::Roundtrip) {
        let mut csv = String::from("t,x,y,hausdorff,g_error\n");
        if let Some(cells) = report.data.get("cells").and_then(|v| v.as_array()) {
            for c in cells {
                let row = c.as_array().unwrap();
                let t = row[0].as_f64().unwrap();
                let x = row[1].as_f64().unwrap();
                let (y, h, g) = if row.len() >= 5 {
                    (
                        row[2].as_f64().unwrap(),
                        row[row.len() - 2].as_f64().unwrap(),
                        row[row.len() - 1].as_f64().unwrap(),
                    )
                } else {
                    (
                        0.0,
                        row[row.len() - 2].as_f64().unwrap(),
                        row[row.len() - 1].as_f64().unwrap(),
                    )
                };
                csv.push_str(&format!("{t},{x},{y},{h},{g}\n"));
            }
        }
        produced.push(write_csv(artifact_dir, "plot_roundtrip.csv", &csv)?);
    }
    if let Some(report) = read(Task::Skies) {
        let mut csv = String::from("s,ray,margin\n");
        if let Some(rows) = report.data.get("rows").and_then(|v| v.as_array()) {
            for r in rows {
                let row = r.as_array().unwrap();
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row[0].as_f64().unwrap(),
                    row[1].as_u64().unwrap(),
                    row[2].as_f64().unwrap()
                ));
            }
        }
        produced.push(write_csv(artifact_dir, "plot_skies.csv", &csv)?);
    }
    if let Some(report) = read(Task::Probe) {
        let mut csv = String::from("ray,crossings,completed\n");
        if let Some(rows) = report.data.get("rows").and_then(|v| v.as_array()) {
            for r in rows {
                let row = r.as_array().unwrap();
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row[0].as_u64().unwrap(),
                    row[1].as_u64().unwrap(),
                    row[2].as_bool().unwrap()
                ));
            }
        }
        produced.push(write_csv(artifact_dir, "plot_probe.csv", &csv)?);
    }
    if let Some(report) = read(Task::Lipschitz) {
        let mut csv = String::from("name,value\n");
        for key in ["lipschitz_estimate", "lipschitz_estimate_halved_step"] {
            if let Some(v) = report.data.get(key).and_then(|v| v.as_f64()) {
                csv.push_str(&format!("{key},{v}\n"));
            }
        }
        produced.push(write_csv(artifact_dir, "plot_lipschitz.csv", &csv)?);
    }

    if produced.is_empty() {
        return Err(format!("no task artifacts found in {}", artifact_dir.display()));
    }
    Ok(produced)
}

fn write_csv(dir: &Path, name: &str, content: &str) -> Result<PathBuf, String> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}
