//! Task execution: build the core objects from a scenario and run the
//! requested checks, producing one JSON artifact per task with gate
//! verdicts and plottable data rows.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use lightcone_core::base::{BaseManifold, BasePoint, SpacetimeCurve, SpacetimeEvent, Topology};
use lightcone_core::cone::{check_lorentz_finsler_space, CheckRegion, ConeStructure};
use lightcone_core::contact::{
    positivity_margin, sky_isotopy_positivity, sky_isotopy_with_markers, CausalVerdict,
};
use lightcone_core::correspondence::{
    cauchy_crossing_probe, cone_from_path, path_from_cone, roundtrip_check, RoundtripGrid,
};
use lightcone_core::dynamics::{
    cone_geodesic, lagrangian_geodesic, IntegratorConfig, PositivePath, RayPoint,
};
use lightcone_core::finsler::{CovectorField, FinslerFamily, MatrixField};
use lightcone_core::rng::SplitMix64;
use lightcone_core::vecn::{MatN, VecN};

use crate::config::{Scenario, SourceSpec, Task, TopologySpec};
use crate::expr::Expr;

/// Scenario materialized into core objects.
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub base: BaseManifold,
    pub family: Option<FinslerFamily>,
    pub cone: Option<ConeStructure>,
    pub path: PositivePath,
}

#[derive(Debug)]
pub struct BuildError(pub String);

impl std::fmt::Display for BuildError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for BuildError {}

pub fn build(scenario: Scenario) -> Result<BuiltScenario, BuildError> {
    let base = match &scenario.topology {
        TopologySpec::Euclidean => BaseManifold::euclidean(scenario.dim),
        TopologySpec::Torus(periods) => BaseManifold::torus(periods),
    }
    .map_err(|e| BuildError(e.to_string()))?;

    let cfg = IntegratorConfig {
        step: scenario.step,
        horizon: scenario.horizon.max(scenario.probe_horizon + 1.0),
        margin_delta: scenario.step.max(1e-3),
    };

    let family = match &scenario.source {
        SourceSpec::Euclidean => Some(FinslerFamily::euclidean(scenario.dim)),
        SourceSpec::Riemannian { a } => Some(
            FinslerFamily::riemannian(&base, matrix_field(a))
                .map_err(|e| BuildError(e.to_string()))?,
        ),
        SourceSpec::Randers { a, b } => Some(
            FinslerFamily::randers(&base, matrix_field(a), covector_field(b))
                .map_err(|e| BuildError(e.to_string()))?,
        ),
        SourceSpec::Petal { .. } => None,
    };

    let (cone, path) = match (&scenario.source, &family) {
        (SourceSpec::Petal { petals, amplitude, angular_rate }, None) => {
            let (k, a, w) = (*petals as f64, *amplitude, *angular_rate);
            let path = PositivePath::from_contact_hamiltonian(
                base.clone(),
                move |t, _, v: &VecN| {
                    let th = v[1].atan2(v[0]);
                    v.norm() * (1.0 + a * (k * th - w * t).cos())
                },
                cfg,
            )
            .map_err(|e| BuildError(e.to_string()))?;
            (None, path)
        }
        (_, Some(fam)) => {
            let cone = ConeStructure::new(base.clone(), fam.clone())
                .map_err(|e| BuildError(e.to_string()))?;
            let path = path_from_cone(&cone, cfg);
            (Some(cone), path)
        }
        _ => unreachable!("validated at parse time"),
    };

    Ok(BuiltScenario { scenario, base, family, cone, path })
}

fn matrix_field(a: &[Vec<Expr>]) -> MatrixField {
    let rows: Arc<Vec<Vec<Expr>>> = Arc::new(a.to_vec());
    MatrixField::from_fn(move |t, p: &BasePoint| {
        let n = rows.len();
        let mut m = MatN::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rows[i][j].eval(t, p.coords().as_slice()));
            }
        }
        m
    })
}

fn covector_field(b: &[Expr]) -> CovectorField {
    let entries: Arc<Vec<Expr>> = Arc::new(b.to_vec());
    CovectorField::from_fn(move |t, p: &BasePoint| {
        let mut v = VecN::zeros(entries.len());
        for (i, e) in entries.iter().enumerate() {
            v[i] = e.eval(t, p.coords().as_slice());
        }
        v
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// "<=", ">" or ">=" against the threshold.
    pub relation: String,
    pub pass: bool,
}

impl Gate {
    fn le(name: &str, value: f64, threshold: f64) -> Gate {
        Gate {
            name: name.into(),
            value,
            threshold,
            relation: "<=".into(),
            pass: value <= threshold,
        }
    }

    fn gt(name: &str, value: f64, threshold: f64) -> Gate {
        Gate {
            name: name.into(),
            value,
            threshold,
            relation: ">".into(),
            pass: value > threshold,
        }
    }

    fn lt(name: &str, value: f64, threshold: f64) -> Gate {
        Gate {
            name: name.into(),
            value,
            threshold,
            relation: "<".into(),
            pass: value < threshold,
        }
    }

    fn flag(name: &str, ok: bool) -> Gate {
        Gate {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            relation: ">=".into(),
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub scenario: String,
    pub seed: u64,
    pub step: f64,
    pub tol_scale: f64,
    pub pass: bool,
    pub gates: Vec<Gate>,
    pub data: serde_json::Value,
}

impl TaskReport {
    fn new(task: Task, sc: &Scenario, gates: Vec<Gate>, data: serde_json::Value) -> TaskReport {
        TaskReport {
            task: task.name().into(),
            scenario: sc.name.clone(),
            seed: sc.seed,
            step: sc.step,
            tol_scale: sc.tol_scale,
            pass: gates.iter().all(|g| g.pass),
            gates,
            data,
        }
    }
}

pub fn run_task(built: &BuiltScenario, task: Task) -> Result<TaskReport, BuildError> {
    match task {
        Task::Geodesics => run_geodesics(built),
        Task::Roundtrip => run_roundtrip(built),
        Task::Positivity => run_positivity(built),
        Task::Skies => run_skies(built),
        Task::Lipschitz => run_lipschitz(built),
        Task::Probe => run_probe(built),
    }
    .map_err(|e| BuildError(e.to_string()))
}

fn sample_box(base: &BaseManifold) -> Vec<(f64, f64)> {
    match base.topology() {
        Topology::Euclidean => vec![(-0.5, 0.5); base.dim()],
        Topology::Torus(periods) => periods.iter().map(|&l| (0.0, l)).collect(),
    }
}

fn sample_point(base: &BaseManifold, rng: &mut SplitMix64) -> BasePoint {
    let coords: Vec<f64> = sample_box(base).iter().map(|&(lo, hi)| rng.range(lo, hi)).collect();
    base.point(&coords).expect("sampled point valid")
}

fn run_geodesics(built: &BuiltScenario) -> lightcone_core::Result<TaskReport> {
    let sc = &built.scenario;
    let base = &built.base;
    let cone = built.cone.as_ref().expect("metric scenario");
    let is_flat = matches!(sc.source, SourceSpec::Euclidean);
    let mut rng = SplitMix64::new(sc.seed ^ 0x6E0);
    let mut rays_json = Vec::new();
    let mut max_null = 0.0f64;
    let mut max_cross = 0.0f64;
    let mut max_straight = 0.0f64;
    for ray_idx in 0..sc.geodesic_rays {
        let p0 = sample_point(base, &mut rng);
        let v = rng.direction(base.dim());
        let ray = RayPoint::unit_euclidean(p0, v)?;
        let geo = cone_geodesic(&built.path, &ray, 0.0, 1.0)?;
        let null = geo.null_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        max_null = max_null.max(null);

        // Independent Lagrangian integration from matched initial data.
        let lag = lagrangian_geodesic(
            cone,
            &SpacetimeEvent { t: 0.0, p: p0 },
            &geo.velocities[0],
            1.0,
            sc.step,
        )?;
        let mut sup = 0.0f64;
        for (k, ev) in lag.events.iter().enumerate() {
            if k % 16 != 0 {
                continue;
            }
            if let Some(q) = geo.position_at(base, ev.t) {
                sup = sup.max(base.distance(&ev.p, &q));
            }
        }
        max_cross = max_cross.max(sup);

        if is_flat {
            // Straight-line reference: p(t) = p0 + t w.
            let w = geo.velocities[0];
            for (i, t) in geo.ts.iter().enumerate() {
                let straight = base.displace(&p0, &w.scale(*t));
                max_straight = max_straight.max(base.distance(&straight, &geo.points[i]));
            }
        }

        let thin = (geo.ts.len() / 100).max(1);
        let samples: Vec<serde_json::Value> = geo
            .ts
            .iter()
            .enumerate()
            .filter(|(i, _)| i % thin == 0)
            .map(|(i, t)| {
                let mut row = vec![*t];
                row.extend_from_slice(geo.points[i].coords().as_slice());
                row.push(geo.null_residuals[i]);
                json!(row)
            })
            .collect();
        rays_json.push(json!({
            "ray": ray_idx,
            "cross_method_error": sup,
            "max_null_residual": null,
            "samples": samples,
        }));
    }
    let mut gates = vec![
        Gate::le("null_residual", max_null, sc.tol("null_residual", 1e-6)),
        Gate::le("cross_method", max_cross, sc.tol("cross_method", 1e-4)),
    ];
    if is_flat {
        gates.push(Gate::le("straightness", max_straight, sc.tol("straightness", 1e-6)));
    }
    Ok(TaskReport::new(Task::Geodesics, sc, gates, json!({ "rays": rays_json })))
}

fn run_roundtrip(built: &BuiltScenario) -> lightcone_core::Result<TaskReport> {
    let sc = &built.scenario;
    let cone = built.cone.as_ref().expect("metric scenario");
    let mut grid = RoundtripGrid::default_for(&built.base);
    grid.times = sc.grid_times;
    grid.points = sc.grid_points;
    grid.directions = sc.grid_directions;
    grid.p_ranges = sample_box(&built.base);
    grid.seed = sc.seed ^ 0x407;
    let slice_tol = sc.tol("roundtrip_slice", 1e-3);
    let g_tol = sc.tol("roundtrip_g", 1e-3);
    let report = roundtrip_check(cone, &built.path, &grid, slice_tol, g_tol)?;
    let gates = vec![
        Gate::le("roundtrip_slice", report.max_hausdorff, slice_tol),
        Gate::le("roundtrip_g", report.max_g_error, g_tol),
    ];
    let cells: Vec<serde_json::Value> = report
        .cells
        .iter()
        .map(|c| {
            let mut row = vec![c.t];
            row.extend_from_slice(&c.p);
            row.push(c.hausdorff);
            row.push(c.g_error);
            json!(row)
        })
        .collect();
    Ok(TaskReport::new(
        Task::Roundtrip,
        sc,
        gates,
        json!({
            "cells": cells,
            "directions": report.directions,
            "margin_delta": report.margin_delta,
        }),
    ))
}

fn run_positivity(built: &BuiltScenario) -> lightcone_core::Result<TaskReport> {
    let sc = &built.scenario;
    let base = &built.base;
    let reversed = built.path.reversed();
    let mut rng = SplitMix64::new(sc.seed ^ 0x905);
    let mut rows = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut max_dev = 0.0f64;
    let mut max_reversed = f64::NEG_INFINITY;
    let dirs = lightcone_core::directions::DirectionSet::canonical(base.dim(), 16);
    for it in 0..sc.grid_times {
        let t = if sc.grid_times == 1 {
            0.0
        } else {
            it as f64 / (sc.grid_times - 1) as f64
        };
        let p = sample_point(base, &mut rng);
        for (ri, u) in dirs.dirs().iter().enumerate() {
            let ray = RayPoint::unit_euclidean(p, *u)?;
            let m = positivity_margin(&built.path, t, &ray)?;
            let mr = positivity_margin(&reversed, t, &ray)?;
            min_margin = min_margin.min(m);
            max_dev = max_dev.max((m - 1.0).abs());
            max_reversed = max_reversed.max(mr);
            rows.push(json!([t, ri, m, mr]));
        }
    }
    let gates = vec![
        Gate::gt("min_margin", min_margin, 0.0),
        Gate::le("margin_deviation", max_dev, sc.tol("margin_dev", 1e-5)),
        Gate::lt("reversed_max_margin", max_reversed, 0.0),
    ];
    Ok(TaskReport::new(Task::Positivity, sc, gates, json!({ "rows": rows })))
}

fn run_skies(built: &BuiltScenario) -> lightcone_core::Result<TaskReport> {
    let sc = &built.scenario;
    let base = &built.base;
    let mut rng = SplitMix64::new(sc.seed ^ 0x541);
    let p0 = sample_point(base, &mut rng);

    // Timelike curve t -> (t, p0): margins uniformly negative with a floor.
    let curve: SpacetimeCurve = (0..21)
        .map(|i| {
            let t = i as f64 * 0.05;
            (t, SpacetimeEvent { t, p: p0 })
        })
        .collect();
    let timelike = sky_isotopy_positivity(
        &built.path,
        &curve,
        lightcone_core::contact::DEFAULT_SKY_SAMPLES,
    )?;
    let mut rows = Vec::new();
    for (j, row) in timelike.margins.iter().enumerate() {
        let s = curve[j + 1].0;
        for (ri, m) in row.iter().enumerate() {
            rows.push(json!([s, ri, m]));
        }
    }

    // Tangent-ray margin along one of the path's own cone geodesics.
    let ray = RayPoint::unit_euclidean(p0, rng.direction(base.dim()))?;
    let geo = cone_geodesic(&built.path, &ray, 0.0, 1.0)?;
    let lo = (geo.ts.len() * 2) / 5;
    let hi = (geo.ts.len() * 3) / 5;
    let stride = ((hi - lo) / 50).max(1);
    let mut tangent_curve: SpacetimeCurve = Vec::new();
    let mut markers: Vec<Vec<VecN>> = Vec::new();
    let mut k = lo;
    while k <= hi {
        tangent_curve.push((geo.ts[k], geo.event(k)));
        markers.push(vec![geo.covectors[k]]);
        k += stride;
    }
    let tangent = sky_isotopy_with_markers(&built.path, &tangent_curve, &markers)?;
    let tangent_worst = tangent
        .margins
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()));

    let gates = vec![
        Gate::flag(
            "timelike_one_signed",
            timelike.verdict == CausalVerdict::TimelikeConsistent,
        ),
        Gate {
            name: "margin_floor".into(),
            value: timelike.min_abs_margin,
            threshold: sc.tol("sky_margin_floor", 0.1),
            relation: ">=".into(),
            pass: timelike.min_abs_margin >= sc.tol("sky_margin_floor", 0.1),
        },
        Gate::le("tangent_margin", tangent_worst, sc.tol("sky_tangent", 1e-5)),
    ];
    Ok(TaskReport::new(
        Task::Skies,
        sc,
        gates,
        json!({
            "rows": rows,
            "sign_convention": timelike.sign_convention,
            "tangent_margin": tangent_worst,
        }),
    ))
}

fn run_lipschitz(built: &BuiltScenario) -> lightcone_core::Result<TaskReport> {
    let sc = &built.scenario;
    let space = cone_from_path(&built.path)?;
    let mut region = CheckRegion::default_for(&built.base);
    region.t_range = (0.0, 1.0);
    region.p_ranges = sample_box(&built.base);
    // Torus regions cover a full period; keep the grid similar in size.
    region.lipschitz_step = match built.base.topology() {
        Topology::Torus(periods) => {
            periods.iter().cloned().fold(f64::MIN, f64::max) / 12.0
        }
        Topology::Euclidean => 0.25,
    };
    region.samples = 500;
    region.seed = sc.seed ^ 0x11b;
    let report = check_lorentz_finsler_space(&space, &region)?;

    let mut halved = region.clone();
    halved.lipschitz_step = region.lipschitz_step / 2.0;
    let report2 = check_lorentz_finsler_space(&space, &halved)?;

    let lip = report.lipschitz_estimate.unwrap_or(f64::NAN);
    let lip2 = report2.lipschitz_estimate.unwrap_or(f64::NAN);
    let stability = if lip.abs() > 1e-12 {
        (lip - lip2).abs() / lip.abs()
    } else {
        (lip - lip2).abs()
    };
    let gates = vec![
        Gate::le(
            "homogeneity_violation",
            report.max_homogeneity_violation,
            sc.tol("lf_homogeneity", 1e-6),
        ),
        Gate::le(
            "concavity_violation",
            report.max_concavity_violation,
            sc.tol("lf_concavity", 1e-6),
        ),
        Gate::flag("slices_convex", report.all_slices_convex),
        Gate::flag("lipschitz_finite", lip.is_finite()),
        Gate::le("lipschitz_stability", stability, sc.tol("lipschitz_stability", 0.1)),
    ];
    Ok(TaskReport::new(
        Task::Lipschitz,
        sc,
        gates,
        json!({
            "lipschitz_estimate": lip,
            "lipschitz_estimate_halved_step": lip2,
            "violations": serde_json::to_value(&report.worst).unwrap(),
            "slice_convexity": serde_json::to_value(&report.slice_convexity).unwrap(),
        }),
    ))
}

fn run_probe(built: &BuiltScenario) -> lightcone_core::Result<TaskReport> {
    let sc = &built.scenario;
    let base = &built.base;
    let mut rng = SplitMix64::new(sc.seed ^ 0x9B0);
    let rays: Vec<RayPoint> = (0..sc.probe_rays)
        .map(|_| {
            RayPoint::unit_euclidean(sample_point(base, &mut rng), rng.direction(base.dim()))
        })
        .collect::<lightcone_core::Result<_>>()?;
    let report = cauchy_crossing_probe(&built.path, &rays, sc.probe_horizon);
    let mut gates = vec![Gate::flag("all_completed", report.all_completed)];
    if sc.probe_assert_crossings {
        gates.push(Gate::flag("single_crossing", report.all_single_crossing));
    }
    let rows: Vec<serde_json::Value> = report
        .per_ray
        .iter()
        .map(|r| json!([r.ray, r.crossings, r.completed, r.blowup_t]))
        .collect();
    Ok(TaskReport::new(
        Task::Probe,
        sc,
        gates,
        json!({
            "rows": rows,
            "label": report.label,
            "note": report.note,
            "all_single_crossing": report.all_single_crossing,
        }),
    ))
}
