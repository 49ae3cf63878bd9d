use std::path::PathBuf;
use std::process::ExitCode;

use lightcone_cli::runner::{export_plotdata, run_scenario, Overrides};

const USAGE: &str = "\
lightcone — cone structures, contact flows and their correspondence

USAGE:
    lightcone run <scenario-file> [--out DIR] [--seed N] [--step H] [--tol-scale S]
    lightcone export <artifact-dir>

The default output root is ./lightcone_out or $LIGHTCONE_OUT; `run`
writes one JSON artifact per task under <root>/<scenario-name>/ and
exits 0 iff every tolerance gate passes (2 on configuration errors).
`export` derives the plot-ready CSV bundle from a run's artifacts.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => run_command(&args[1..]),
        Some("export") => export_command(&args[1..]),
        Some("--help") | Some("-h") | None => {
            print!("{USAGE}");
            ExitCode::from(if args.is_empty() { 2 } else { 0 })
        }
        Some(other) => {
            eprintln!("unknown command '{other}'\n\n{USAGE}");
            ExitCode::from(2)
        }
    }
}

fn run_command(args: &[String]) -> ExitCode {
    let mut scenario: Option<PathBuf> = None;
    let mut out: Option<PathBuf> = None;
    let mut overrides = Overrides { seed: None, step: None, tol_scale: None };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => match it.next() {
                Some(v) => out = Some(PathBuf::from(v)),
                None => return missing_value("--out"),
            },
            "--seed" => match it.next().and_then(|v| v.parse().ok()) {
                Some(v) => overrides.seed = Some(v),
                None => return missing_value("--seed"),
            },
            "--step" => match it.next().and_then(|v| v.parse().ok()) {
                Some(v) => overrides.step = Some(v),
                None => return missing_value("--step"),
            },
            "--tol-scale" => match it.next().and_then(|v| v.parse().ok()) {
                Some(v) => overrides.tol_scale = Some(v),
                None => return missing_value("--tol-scale"),
            },
            other if scenario.is_none() && !other.starts_with("--") => {
                scenario = Some(PathBuf::from(other));
            }
            other => {
                eprintln!("unexpected argument '{other}'\n\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }
    let Some(scenario) = scenario else {
        eprintln!("missing scenario file\n\n{USAGE}");
        return ExitCode::from(2);
    };
    let outcome = run_scenario(&scenario, out.as_deref(), &overrides);
    for line in &outcome.messages {
        println!("{line}");
    }
    if !outcome.artifacts.is_empty() {
        println!(
            "{} artifact file(s) in {}",
            outcome.artifacts.len(),
            outcome.artifacts[0].parent().unwrap().display()
        );
    }
    ExitCode::from(outcome.exit_code as u8)
}

fn export_command(args: &[String]) -> ExitCode {
    let Some(dir) = args.first() else {
        eprintln!("missing artifact directory\n\n{USAGE}");
        return ExitCode::from(2);
    };
    match export_plotdata(&PathBuf::from(dir)) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn missing_value(flag: &str) -> ExitCode {
    eprintln!("{flag} needs a value\n\n{USAGE}");
    ExitCode::from(2)
}
