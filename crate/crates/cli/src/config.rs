//! Scenario configuration: a flat key = value text format with a small
//! expression grammar for time-dependent metric coefficients.
//!
//! Lines are `key = value`; `#` starts a comment; unknown keys are
//! rejected with the offending line and column. Numeric scalars accept
//! constant expressions (`2 * pi`), metric coefficients accept the full
//! grammar over t and the base coordinates.

use std::collections::BTreeMap;
use std::fmt;

use crate::expr::{Expr, Parser};

#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}:{}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    Geodesics,
    Roundtrip,
    Positivity,
    Skies,
    Lipschitz,
    Probe,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Geodesics => "geodesics",
            Task::Roundtrip => "roundtrip",
            Task::Positivity => "positivity",
            Task::Skies => "skies",
            Task::Lipschitz => "lipschitz",
            Task::Probe => "probe",
        }
    }

    fn parse(s: &str) -> Option<Task> {
        Some(match s {
            "geodesics" => Task::Geodesics,
            "roundtrip" => Task::Roundtrip,
            "positivity" => Task::Positivity,
            "skies" => Task::Skies,
            "lipschitz" => Task::Lipschitz,
            "probe" => Task::Probe,
            _ => return None,
        })
    }

    pub fn all() -> Vec<Task> {
        vec![
            Task::Geodesics,
            Task::Roundtrip,
            Task::Positivity,
            Task::Skies,
            Task::Lipschitz,
            Task::Probe,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Euclidean,
    Torus(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Euclidean,
    Riemannian { a: Vec<Vec<Expr>> },
    Randers { a: Vec<Vec<Expr>>, b: Vec<Expr> },
    /// Built-in non-convex gauge family: |v| (1 + amplitude cos(k theta - rate t)).
    Petal { petals: u32, amplitude: f64, angular_rate: f64 },
}

impl SourceSpec {
    pub fn is_metric(&self) -> bool {
        !matches!(self, SourceSpec::Petal { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub topology: TopologySpec,
    pub source: SourceSpec,
    pub step: f64,
    pub horizon: f64,
    pub seed: u64,
    pub grid_times: usize,
    pub grid_points: usize,
    pub grid_directions: usize,
    pub geodesic_rays: usize,
    pub probe_rays: usize,
    pub probe_horizon: f64,
    pub probe_assert_crossings: bool,
    pub tol_overrides: BTreeMap<String, f64>,
    pub tol_scale: f64,
    pub tasks: Vec<Task>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: String::new(),
            dim: 2,
            topology: TopologySpec::Euclidean,
            source: SourceSpec::Euclidean,
            step: 1e-3,
            horizon: 10.0,
            seed: 1,
            grid_times: 5,
            grid_points: 8,
            grid_directions: 512,
            geodesic_rays: 20,
            probe_rays: 200,
            probe_horizon: 5.0,
            probe_assert_crossings: true,
            tol_overrides: BTreeMap::new(),
            tol_scale: 1.0,
            tasks: Task::all(),
        }
    }
}

fn const_expr(line: usize, col: usize, s: &str) -> Result<f64, ConfigError> {
    let e = Parser::parse(s).map_err(|e| ConfigError {
        line,
        col: col + e.col,
        msg: e.msg,
    })?;
    if !e.is_constant() {
        return Err(ConfigError {
            line,
            col,
            msg: format!("value '{s}' must be a numeric constant"),
        });
    }
    Ok(e.eval(0.0, &[]))
}

fn expr_list(line: usize, col: usize, s: &str) -> Result<Vec<Expr>, ConfigError> {
    s.split(',')
        .map(|piece| {
            Parser::parse(piece.trim()).map_err(|e| ConfigError {
                line,
                col: col + e.col,
                msg: e.msg,
            })
        })
        .collect()
}

fn expr_matrix(line: usize, col: usize, s: &str) -> Result<Vec<Vec<Expr>>, ConfigError> {
    s.split(';').map(|row| expr_list(line, col, row.trim())).collect()
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
        let mut sc = Scenario::default();
        let mut saw_name = false;
        let mut metric_kind: Option<String> = None;
        let mut metric_a: Option<Vec<Vec<Expr>>> = None;
        let mut metric_b: Option<Vec<Expr>> = None;
        let mut path_kind: Option<String> = None;
        let mut petals: u32 = 3;
        let mut amplitude: f64 = 0.3;
        let mut angular_rate: f64 = 0.0;
        let mut periods: Option<Vec<f64>> = None;
        let mut topology: Option<String> = None;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let eq = line.find('=').ok_or(ConfigError {
                line: line_no,
                col: 1,
                msg: "expected 'key = value'".into(),
            })?;
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            let vcol = eq + 2 + (line[eq + 1..].len() - line[eq + 1..].trim_start().len());
            let kcol = line.len() - line.trim_start().len() + 1;
            if value.is_empty() {
                return Err(ConfigError {
                    line: line_no,
                    col: vcol,
                    msg: format!("empty value for '{key}'"),
                });
            }

            match key {
                "name" => {
                    sc.name = value.to_string();
                    saw_name = true;
                }
                "manifold.dim" => {
                    sc.dim = const_expr(line_no, vcol, value)? as usize;
                }
                "manifold.topology" => topology = Some(value.to_string()),
                "manifold.periods" => {
                    let vals: Result<Vec<f64>, _> = value
                        .split(',')
                        .map(|p| const_expr(line_no, vcol, p.trim()))
                        .collect();
                    periods = Some(vals?);
                }
                "metric.kind" => metric_kind = Some(value.to_string()),
                "metric.a" => metric_a = Some(expr_matrix(line_no, vcol, value)?),
                "metric.b" => metric_b = Some(expr_list(line_no, vcol, value)?),
                "path.kind" => path_kind = Some(value.to_string()),
                "path.petals" => petals = const_expr(line_no, vcol, value)? as u32,
                "path.amplitude" => amplitude = const_expr(line_no, vcol, value)?,
                "path.angular_rate" => angular_rate = const_expr(line_no, vcol, value)?,
                "integrator.step" => sc.step = const_expr(line_no, vcol, value)?,
                "integrator.horizon" => sc.horizon = const_expr(line_no, vcol, value)?,
                "seed" => sc.seed = const_expr(line_no, vcol, value)? as u64,
                "grid.times" => sc.grid_times = const_expr(line_no, vcol, value)? as usize,
                "grid.points" => sc.grid_points = const_expr(line_no, vcol, value)? as usize,
                "grid.directions" => {
                    sc.grid_directions = const_expr(line_no, vcol, value)? as usize
                }
                "geodesics.rays" => sc.geodesic_rays = const_expr(line_no, vcol, value)? as usize,
                "probe.rays" => sc.probe_rays = const_expr(line_no, vcol, value)? as usize,
                "probe.horizon" => sc.probe_horizon = const_expr(line_no, vcol, value)?,
                "probe.assert_crossings" => {
                    sc.probe_assert_crossings = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(ConfigError {
                                line: line_no,
                                col: vcol,
                                msg: format!("expected true/false, got '{other}'"),
                            })
                        }
                    };
                }
                "tol.scale" => sc.tol_scale = const_expr(line_no, vcol, value)?,
                "tasks" => {
                    let mut tasks = Vec::new();
                    for piece in value.split(',') {
                        let p = piece.trim();
                        if p == "all" {
                            tasks = Task::all();
                            continue;
                        }
                        let t = Task::parse(p).ok_or(ConfigError {
                            line: line_no,
                            col: vcol,
                            msg: format!("unknown task '{p}'"),
                        })?;
                        tasks.push(t);
                    }
                    sc.tasks = tasks;
                }
                other if other.starts_with("tol.") => {
                    let name = other.trim_start_matches("tol.").to_string();
                    sc.tol_overrides.insert(name, const_expr(line_no, vcol, value)?);
                }
                other => {
                    return Err(ConfigError {
                        line: line_no,
                        col: kcol,
                        msg: format!("unknown key '{other}'"),
                    });
                }
            }
        }

        if !saw_name {
            return Err(ConfigError { line: 1, col: 1, msg: "missing 'name'".into() });
        }
        if !(1..=3).contains(&sc.dim) {
            return Err(ConfigError {
                line: 1,
                col: 1,
                msg: format!("manifold.dim {} not in 1..=3", sc.dim),
            });
        }
        if sc.dim >= 2 && sc.grid_directions < 256 {
            return Err(ConfigError {
                line: 1,
                col: 1,
                msg: format!(
                    "grid.directions = {} below the sampled-body minimum of 256",
                    sc.grid_directions
                ),
            });
        }

        sc.topology = match topology.as_deref() {
            None | Some("euclidean") => TopologySpec::Euclidean,
            Some("torus") => {
                let per = periods.unwrap_or_else(|| {
                    vec![2.0 * std::f64::consts::PI; sc.dim]
                });
                if per.len() != sc.dim {
                    return Err(ConfigError {
                        line: 1,
                        col: 1,
                        msg: format!(
                            "manifold.periods has {} entries for dim {}",
                            per.len(),
                            sc.dim
                        ),
                    });
                }
                TopologySpec::Torus(per)
            }
            Some(other) => {
                return Err(ConfigError {
                    line: 1,
                    col: 1,
                    msg: format!("unknown topology '{other}'"),
                })
            }
        };

        sc.source = match (metric_kind.as_deref(), path_kind.as_deref()) {
            (Some(_), Some(_)) => {
                return Err(ConfigError {
                    line: 1,
                    col: 1,
                    msg: "specify either metric.kind or path.kind, not both".into(),
                })
            }
            (Some("euclidean"), None) => SourceSpec::Euclidean,
            (Some("riemannian"), None) => {
                let a = metric_a.ok_or(ConfigError {
                    line: 1,
                    col: 1,
                    msg: "riemannian metric needs metric.a".into(),
                })?;
                check_matrix_shape(&a, sc.dim)?;
                SourceSpec::Riemannian { a }
            }
            (Some("randers"), None) => {
                let a = metric_a.unwrap_or_else(|| identity_exprs(sc.dim));
                check_matrix_shape(&a, sc.dim)?;
                let b = metric_b.ok_or(ConfigError {
                    line: 1,
                    col: 1,
                    msg: "randers metric needs metric.b".into(),
                })?;
                if b.len() != sc.dim {
                    return Err(ConfigError {
                        line: 1,
                        col: 1,
                        msg: format!("metric.b has {} entries for dim {}", b.len(), sc.dim),
                    });
                }
                SourceSpec::Randers { a, b }
            }
            (Some(other), None) => {
                return Err(ConfigError {
                    line: 1,
                    col: 1,
                    msg: format!("unknown metric kind '{other}'"),
                })
            }
            (None, Some("petal")) => {
                if sc.dim != 2 {
                    return Err(ConfigError {
                        line: 1,
                        col: 1,
                        msg: "petal path gauge is 2-dimensional".into(),
                    });
                }
                if !(amplitude.abs() < 1.0) {
                    return Err(ConfigError {
                        line: 1,
                        col: 1,
                        msg: format!("petal amplitude {amplitude} must satisfy |a| < 1"),
                    });
                }
                SourceSpec::Petal { petals, amplitude, angular_rate }
            }
            (None, Some(other)) => {
                return Err(ConfigError {
                    line: 1,
                    col: 1,
                    msg: format!("unknown path kind '{other}'"),
                })
            }
            (None, None) => {
                return Err(ConfigError {
                    line: 1,
                    col: 1,
                    msg: "scenario needs metric.kind or path.kind".into(),
                })
            }
        };

        if sc.tasks.contains(&Task::Geodesics) && !sc.source.is_metric() {
            return Err(ConfigError {
                line: 1,
                col: 1,
                msg: "the geodesics task needs a metric-family scenario".into(),
            });
        }
        if sc.tasks.contains(&Task::Roundtrip) && !sc.source.is_metric() {
            return Err(ConfigError {
                line: 1,
                col: 1,
                msg: "the roundtrip task needs a metric-family scenario".into(),
            });
        }
        Ok(sc)
    }

    /// Canonical config text; parsing it reproduces an equivalent scenario.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("manifold.dim = {}\n", self.dim));
        match &self.topology {
            TopologySpec::Euclidean => out.push_str("manifold.topology = euclidean\n"),
            TopologySpec::Torus(per) => {
                out.push_str("manifold.topology = torus\n");
                let joined: Vec<String> = per.iter().map(|x| format!("{x}")).collect();
                out.push_str(&format!("manifold.periods = {}\n", joined.join(", ")));
            }
        }
        match &self.source {
            SourceSpec::Euclidean => out.push_str("metric.kind = euclidean\n"),
            SourceSpec::Riemannian { a } => {
                out.push_str("metric.kind = riemannian\n");
                out.push_str(&format!("metric.a = {}\n", matrix_text(a)));
            }
            SourceSpec::Randers { a, b } => {
                out.push_str("metric.kind = randers\n");
                out.push_str(&format!("metric.a = {}\n", matrix_text(a)));
                let row: Vec<String> = b.iter().map(|e| e.to_string()).collect();
                out.push_str(&format!("metric.b = {}\n", row.join(", ")));
            }
            SourceSpec::Petal { petals, amplitude, angular_rate } => {
                out.push_str("path.kind = petal\n");
                out.push_str(&format!("path.petals = {petals}\n"));
                out.push_str(&format!("path.amplitude = {amplitude}\n"));
                out.push_str(&format!("path.angular_rate = {angular_rate}\n"));
            }
        }
        out.push_str(&format!("integrator.step = {}\n", self.step));
        out.push_str(&format!("integrator.horizon = {}\n", self.horizon));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("grid.times = {}\n", self.grid_times));
        out.push_str(&format!("grid.points = {}\n", self.grid_points));
        out.push_str(&format!("grid.directions = {}\n", self.grid_directions));
        out.push_str(&format!("geodesics.rays = {}\n", self.geodesic_rays));
        out.push_str(&format!("probe.rays = {}\n", self.probe_rays));
        out.push_str(&format!("probe.horizon = {}\n", self.probe_horizon));
        out.push_str(&format!("probe.assert_crossings = {}\n", self.probe_assert_crossings));
        out.push_str(&format!("tol.scale = {}\n", self.tol_scale));
        for (k, v) in &self.tol_overrides {
            out.push_str(&format!("tol.{k} = {v}\n"));
        }
        let tasks: Vec<&str> = self.tasks.iter().map(|t| t.name()).collect();
        out.push_str(&format!("tasks = {}\n", tasks.join(", ")));
        out
    }

    /// Tolerance with override and global scale applied.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tol_overrides.get(name).copied().unwrap_or(default) * self.tol_scale
    }
}

fn identity_exprs(dim: usize) -> Vec<Vec<Expr>> {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| Expr::Num(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

fn check_matrix_shape(a: &[Vec<Expr>], dim: usize) -> Result<(), ConfigError> {
    if a.len() != dim || a.iter().any(|row| row.len() != dim) {
        return Err(ConfigError {
            line: 1,
            col: 1,
            msg: format!("metric.a must be a {dim}x{dim} matrix"),
        });
    }
    Ok(())
}

fn matrix_text(a: &[Vec<Expr>]) -> String {
    let rows: Vec<String> = a
        .iter()
        .map(|row| {
            let entries: Vec<String> = row.iter().map(|e| e.to_string()).collect();
            entries.join(", ")
        })
        .collect();
    rows.join(" ; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# sample scenario
name = demo
manifold.dim = 2
manifold.topology = euclidean
metric.kind = randers
metric.a = 1, 0 ; 0, 1
metric.b = 0.25 * sin(t), 0
integrator.step = 1e-3
seed = 42
tasks = geodesics, roundtrip
tol.roundtrip_slice = 1e-4
";

    #[test]
    fn parses_sample() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        assert_eq!(sc.name, "demo");
        assert_eq!(sc.dim, 2);
        assert_eq!(sc.tasks, vec![Task::Geodesics, Task::Roundtrip]);
        assert_eq!(sc.tol("roundtrip_slice", 1e-3), 1e-4);
        assert_eq!(sc.tol("roundtrip_g", 1e-3), 1e-3);
        match &sc.source {
            SourceSpec::Randers { b, .. } => {
                let v = b[0].eval(std::f64::consts::FRAC_PI_2, &[0.0, 0.0]);
                assert!((v - 0.25).abs() < 1e-15);
            }
            other => panic!("wrong source {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = "name = x\nmetric.kind = euclidean\nbogus.key = 1\n";
        let err = Scenario::parse(bad).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.msg.contains("unknown key"));
    }

    #[test]
    fn bad_expression_reports_position() {
        let bad = "name = x\nmetric.kind = randers\nmetric.b = tan(t), 0\n";
        let err = Scenario::parse(bad).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.msg.contains("unknown identifier"));
    }

    #[test]
    fn config_roundtrip_is_equivalent() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        let text = sc.to_config();
        let back = Scenario::parse(&text).unwrap();
        assert_eq!(back.name, sc.name);
        assert_eq!(back.tasks, sc.tasks);
        assert_eq!(back.seed, sc.seed);
        assert_eq!(back.step, sc.step);
        // Second serialization is a fixpoint.
        assert_eq!(back.to_config(), text);
    }

    #[test]
    fn petal_with_geodesics_rejected() {
        let bad = "name = p\npath.kind = petal\ntasks = geodesics\n";
        let err = Scenario::parse(bad).unwrap_err();
        assert!(err.msg.contains("geodesics task"));
    }

    #[test]
    fn torus_period_expression() {
        let text = "name = t\nmanifold.dim = 2\nmanifold.topology = torus\nmanifold.periods = 2*pi, 2*pi\nmetric.kind = euclidean\n";
        let sc = Scenario::parse(text).unwrap();
        match &sc.topology {
            TopologySpec::Torus(p) => {
                assert!((p[0] - 2.0 * std::f64::consts::PI).abs() < 1e-15)
            }
            _ => panic!(),
        }
    }
}
