//! The two theorem-level constructions and their verification: a cone
//! structure induces a positive path (generated by H_t = F*_t), a positive
//! path induces a cone with co-balls K_t = { gauge <= 1 } and
//! G = dt - h_{K_t}, and for splitting-type cones the roundtrip returns to
//! the start.
//!
//! `roundtrip_check` deliberately reconstructs the co-ball gauge from the
//! FLOW, by centered time-differences of base positions paired with the
//! Liouville form, rather than reading the generator back. The comparison
//! therefore carries the full numerical pipeline — integrator step, margin
//! window and direction resolution all enter the reported errors, and all
//! of them shrink under refinement. `cone_from_path` itself uses the exact
//! gauge formula.

use serde::Serialize;

use crate::base::{BaseManifold, BasePoint, Topology};
use crate::cone::{ConeStructure, LorentzFinslerSpace};
use crate::contact::positivity_margin;
use crate::convex::StarBody;
use crate::dynamics::{cone_geodesic, Generator, IntegratorConfig, PositivePath, RayPoint};
use crate::error::{Error, Result};
use crate::finsler::FinslerFamily;
use crate::rng::SplitMix64;
use crate::vecn::VecN;

/// The positive path of contactomorphisms induced by a splitting-type cone
/// structure: the flow of the Reeb generators H_t = F*_t.
pub fn path_from_cone(cone: &ConeStructure, cfg: IntegratorConfig) -> PositivePath {
    PositivePath::from_family(cone.base().clone(), cone.family().clone(), cfg)
}

/// Recover the Finsler family as the gauge (Minkowski functional) of the
/// cone slices.
pub fn finsler_from_cone_slices(cone: &ConeStructure) -> FinslerFamily {
    let c = cone.clone();
    FinslerFamily::custom_unchecked(cone.base().dim(), move |t, p, w| {
        let slice = c.cone_slice(t, p);
        match slice.radius(w) {
            Ok(r) => w.norm() / r,
            Err(_) => f64::NAN,
        }
    })
}

/// Recover a Finsler family from the slices of a path-induced space; the
/// gauge of the slice equals the support of the co-ball.
pub fn finsler_from_space_slices(space: &LorentzFinslerSpace) -> Result<FinslerFamily> {
    if space.co_ball(0.0, &space.base().origin()).is_none() {
        return Err(Error::Invalid("space carries no co-ball field".into()));
    }
    let sp = space.clone();
    Ok(FinslerFamily::custom_unchecked(space.base().dim(), move |t, p, w| {
        let k = sp.co_ball(t, p).expect("co-ball present");
        crate::convex::support_function(&k, w).unwrap_or(f64::NAN)
    }))
}

/// The locally Lipschitz Lorentz-Finsler space induced by a positive path:
/// co-balls K_t(p) = { v : gauge_t(p, v) <= 1 } and G = dt - h_{K_t}.
///
/// The gauge is the normalization function of the path's contact forms
/// (alpha / alpha(X_t)); for generator data it is exactly the generator
/// value, so no flow differentiation is involved here. Positivity is
/// checked through flow margins at sampled rays.
pub fn cone_from_path(path: &PositivePath) -> Result<LorentzFinslerSpace> {
    // Margin-based positivity check at a few sampled (t, ray).
    let base = path.base().clone();
    let dirs = crate::directions::DirectionSet::canonical(base.dim(), 4);
    for &t in &[0.0, 0.5] {
        for u in dirs.dirs() {
            let ray = RayPoint::unit_euclidean(base.origin(), *u)?;
            let m = positivity_margin(path, t, &ray)?;
            if !(m > 0.0) {
                return Err(Error::PathNotPositive { value: m });
            }
        }
    }
    let generator = path.generator().clone();
    Ok(LorentzFinslerSpace::from_co_ball_field(base, move |t, p| {
        co_ball_of_generator(&generator, t, p)
    }))
}

fn co_ball_of_generator(generator: &Generator, t: f64, p: &BasePoint) -> StarBody {
    match generator {
        Generator::DualFinsler(fam) => {
            let fr = fam.clone();
            let fh = fam.clone();
            let pr = *p;
            let ph = *p;
            StarBody::from_radial_and_support(
                fam.dim(),
                move |u: &VecN| 1.0 / fr.dual_norm(t, &pr, u).unwrap_or(f64::NAN),
                move |u: &VecN| fh.eval_or_zero(t, &ph, u),
                true,
            )
        }
        Generator::ContactHamiltonian(h) => {
            let h = h.clone();
            let pc = *p;
            let dim = pc.dim();
            StarBody::from_radial_fn(dim, move |u: &VecN| 1.0 / h(t, &pc, u), false)
        }
    }
}

/// Grid and resolution of a roundtrip comparison.
#[derive(Clone, Debug)]
pub struct RoundtripGrid {
    pub t_range: (f64, f64),
    pub times: usize,
    pub points: usize,
    pub p_ranges: Vec<(f64, f64)>,
    pub directions: usize,
    /// Margin half-window as a multiple of the integrator step.
    pub delta_steps: f64,
    pub seed: u64,
}

impl RoundtripGrid {
    pub fn default_for(base: &BaseManifold) -> Self {
        let p_ranges = match base.topology() {
            Topology::Euclidean => vec![(-1.0, 1.0); base.dim()],
            Topology::Torus(periods) => periods.iter().map(|&l| (0.0, l)).collect(),
        };
        RoundtripGrid {
            t_range: (0.0, 1.0),
            times: 5,
            points: 8,
            p_ranges,
            directions: 512,
            delta_steps: 50.0,
            seed: 0xC0FFEE,
        }
    }

}

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripCell {
    pub t: f64,
    pub p: Vec<f64>,
    pub hausdorff: f64,
    pub g_error: f64,
}

/// Roundtrip verdict: per-cell slice and G errors plus maxima.
#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    pub cells: Vec<RoundtripCell>,
    pub max_hausdorff: f64,
    pub max_g_error: f64,
    pub step: f64,
    pub directions: usize,
    pub margin_delta: f64,
    pub slice_tolerance: f64,
    pub g_tolerance: f64,
    pub pass: bool,
}

/// Run path_from_cone, reconstruct the co-balls from the flow, and compare
/// the reconstructed cone slices and G against the original cone.
///
/// Per grid cell (t, p): the co-ball radius along each sampled covector
/// direction u is 1/margin, where the margin is the centered difference of
/// flow base positions through (p, u) paired with u. Slices are compared by
/// support functions over the sampled directions; G over the same
/// directions at dt-component 1.
pub fn roundtrip_check(
    cone: &ConeStructure,
    path: &PositivePath,
    grid: &RoundtripGrid,
    slice_tolerance: f64,
    g_tolerance: f64,
) -> Result<RoundtripReport> {
    let base = cone.base();
    let n = base.dim();
    let step = path.config().step;
    let delta = grid.delta_steps * step;
    let dirs = crate::directions::DirectionSet::canonical(n, grid.directions);
    let mut rng = SplitMix64::new(grid.seed);
    let points: Vec<BasePoint> = (0..grid.points)
        .map(|_| {
            let coords: Vec<f64> =
                grid.p_ranges.iter().map(|&(lo, hi)| rng.range(lo, hi)).collect();
            base.point(&coords).expect("grid point valid")
        })
        .collect();

    let mut cells = Vec::new();
    let mut max_h = 0.0f64;
    let mut max_g = 0.0f64;
    for it in 0..grid.times {
        let t = if grid.times == 1 {
            grid.t_range.0
        } else {
            grid.t_range.0
                + (grid.t_range.1 - grid.t_range.0) * it as f64 / (grid.times - 1) as f64
        };
        for p in &points {
            // Flow-reconstructed co-ball radii: 1 / gauge, gauge from the
            // Liouville margin of the flow through (p, u) at time t.
            let mut radii = Vec::with_capacity(dirs.len());
            for u in dirs.dirs() {
                let rep = RayPoint::unit_euclidean(*p, *u)?;
                let plus = path.flow_between(&rep, t, t + delta)?;
                let minus = path.flow_between(&rep, t, t - delta)?;
                let dp = base.delta(&minus.p, &plus.p).scale(1.0 / (2.0 * delta));
                let gauge = u.dot(&dp);
                if !(gauge > 0.0) || !gauge.is_finite() {
                    return Err(Error::PathNotPositive { value: gauge });
                }
                radii.push(1.0 / gauge);
            }
            let boundary: Vec<VecN> =
                dirs.dirs().iter().zip(&radii).map(|(u, r)| u.scale(*r)).collect();
            let k_flow = StarBody::from_samples(n, radii)?;

            // G probes: the outward normals of the reconstructed boundary.
            // At a normal direction the sampled support is exact for the
            // body the samples describe, so the comparison measures the
            // reconstruction rather than the polygonization. In the plane
            // the normal comes from the neighbouring vertices; on higher
            // spheres from a least-squares tangential gradient of the
            // radial samples; dimension one is its own normal bundle.
            let probes: Vec<VecN> = if n == 2 {
                let m = boundary.len();
                (0..m)
                    .map(|i| {
                        let tau = boundary[(i + 1) % m] - boundary[(i + m - 1) % m];
                        let nrm = VecN::from_slice(&[tau[1], -tau[0]]);
                        nrm.normalized().unwrap_or(*dirs.dirs().get(i).unwrap())
                    })
                    .collect()
            } else if n == 3 {
                boundary_normals_s2(dirs.dirs(), &boundary)
            } else {
                dirs.dirs().to_vec()
            };

            // G error over the probes; slice error by support functions
            // over the sampled directions, with the reconstructed slice's
            // support read off as the polygon gauge of the co-ball.
            let mut cell_g = 0.0f64;
            let mut cell_h = 0.0f64;
            for u in &probes {
                let f_direct = cone.family().eval_or_zero(t, p, u);
                let h_disc = crate::convex::support_function(&k_flow, u)?;
                cell_g = cell_g.max((h_disc - f_direct).abs());
            }
            for u in dirs.dirs() {
                let support_direct = cone.family().dual_norm(t, p, u)?;
                let support_flow = 1.0 / k_flow.radius(u)?;
                cell_h = cell_h.max((support_flow - support_direct).abs());
            }
            max_h = max_h.max(cell_h);
            max_g = max_g.max(cell_g);
            cells.push(RoundtripCell {
                t,
                p: p.coords().as_slice().to_vec(),
                hausdorff: cell_h,
                g_error: cell_g,
            });
        }
    }
    Ok(RoundtripReport {
        cells,
        max_hausdorff: max_h,
        max_g_error: max_g,
        step,
        directions: grid.directions,
        margin_delta: delta,
        slice_tolerance,
        g_tolerance,
        pass: max_h <= slice_tolerance && max_g <= g_tolerance,
    })
}

/// Outward normals of a star surface sampled over S^2: the gauge gradient
/// u - grad_S(rho)/rho with the tangential gradient of the radii fitted by
/// least squares over the nearest sampled neighbours.
fn boundary_normals_s2(dirs: &[VecN], boundary: &[VecN]) -> Vec<VecN> {
    let m = dirs.len();
    let mut normals = Vec::with_capacity(m);
    for i in 0..m {
        let u = dirs[i];
        let rho_i = boundary[i].norm();
        // Nearest neighbours by direction.
        let mut order: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dirs[b].dot(&u).total_cmp(&dirs[a].dot(&u)));
        let neigh = &order[..8.min(order.len())];
        // Tangent basis at u.
        let seed = if u[0].abs() < 0.9 {
            VecN::from_slice(&[1.0, 0.0, 0.0])
        } else {
            VecN::from_slice(&[0.0, 1.0, 0.0])
        };
        let e1 = (seed - u.scale(seed.dot(&u))).normalized().unwrap();
        let e2 = VecN::from_slice(&[
            u[1] * e1[2] - u[2] * e1[1],
            u[2] * e1[0] - u[0] * e1[2],
            u[0] * e1[1] - u[1] * e1[0],
        ]);
        // Least squares for grad_S rho: rho_j - rho_i = g . (u_j - u_i).
        let mut ata = crate::vecn::MatN::zeros(2);
        let mut atb = VecN::zeros(2);
        for &j in neigh {
            let d = dirs[j] - u;
            let dr = boundary[j].norm() - rho_i;
            let row = VecN::from_slice(&[d.dot(&e1), d.dot(&e2)]);
            for a in 0..2 {
                for b in 0..2 {
                    ata.set(a, b, ata.get(a, b) + row[a] * row[b]);
                }
                atb[a] += row[a] * dr;
            }
        }
        let grad = ata.solve(&atb).unwrap_or_else(|| VecN::zeros(2));
        let tangential = e1.scale(grad[0]) + e2.scale(grad[1]);
        let normal = u - tangential.scale(1.0 / rho_i);
        normals.push(normal.normalized().unwrap_or(u));
    }
    normals
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRayOutcome {
    pub ray: usize,
    pub crossings: usize,
    pub completed: bool,
    pub blowup_t: Option<f64>,
}

/// Evidence report of the Cauchy-crossing probe. Experimental by
/// construction: it records outcomes and never asserts global
/// hyperbolicity.
#[derive(Clone, Debug, Serialize)]
pub struct CrossingProbeReport {
    pub label: String,
    pub horizon: f64,
    pub rays: usize,
    pub all_single_crossing: bool,
    pub all_completed: bool,
    pub per_ray: Vec<ProbeRayOutcome>,
    pub note: String,
}

/// Integrate the boundary extremals t -> (t, pi(f_t(v))) over [-T, T] for
/// each ray and record whether each crosses {t = 0} exactly once and
/// whether the flow stayed finite.
pub fn cauchy_crossing_probe(
    path: &PositivePath,
    rays: &[RayPoint],
    horizon: f64,
) -> CrossingProbeReport {
    let mut per_ray = Vec::with_capacity(rays.len());
    let mut all_single = true;
    let mut all_done = true;
    for (i, ray) in rays.iter().enumerate() {
        let outcome = match cone_geodesic(path, ray, -horizon, horizon) {
            Ok(geo) => {
                // Count crossings of {t = 0} along the recorded samples.
                let mut crossings = 0usize;
                for k in 1..geo.ts.len() {
                    let (a, b) = (geo.ts[k - 1], geo.ts[k]);
                    if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
                        crossings += 1;
                    }
                }
                ProbeRayOutcome { ray: i, crossings, completed: true, blowup_t: None }
            }
            Err(Error::BlowUp { t, .. }) => {
                ProbeRayOutcome { ray: i, crossings: 0, completed: false, blowup_t: Some(t) }
            }
            Err(_) => ProbeRayOutcome { ray: i, crossings: 0, completed: false, blowup_t: None },
        };
        all_single &= outcome.crossings == 1 && outcome.completed;
        all_done &= outcome.completed;
        per_ray.push(outcome);
    }
    CrossingProbeReport {
        label: "experimental".into(),
        horizon,
        rays: rays.len(),
        all_single_crossing: all_single,
        all_completed: all_done,
        per_ray,
        note: "crossing evidence over a finite horizon; not a proof of global hyperbolicity"
            .into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::SpacetimeVector;
    use crate::finsler::{CovectorField, MatrixField};
    use crate::vecn::MatN;

    fn minkowski() -> (ConeStructure, PositivePath) {
        let base = BaseManifold::euclidean(2).unwrap();
        let cone = ConeStructure::new(base, FinslerFamily::euclidean(2)).unwrap();
        let path = path_from_cone(&cone, IntegratorConfig::default());
        (cone, path)
    }

    #[test]
    fn minkowski_roundtrip_is_exact() {
        let (cone, path) = minkowski();
        let mut grid = RoundtripGrid::default_for(cone.base());
        grid.times = 3;
        grid.points = 4;
        grid.directions = 256;
        let report = roundtrip_check(&cone, &path, &grid, 1e-9, 1e-9).unwrap();
        assert!(report.pass, "h={:e} g={:e}", report.max_hausdorff, report.max_g_error);
    }

    #[test]
    fn cone_from_path_minkowski_g() {
        let (_, path) = minkowski();
        let space = cone_from_path(&path).unwrap();
        let base = space.base().clone();
        let g = space.g_eval(
            0.3,
            &base.origin(),
            &SpacetimeVector::new(2.0, VecN::from_slice(&[1.0, 0.0])),
        );
        assert!((g - 1.0).abs() < 1e-10, "G = dt - |w| gives 1, got {g}");
    }

    #[test]
    fn reversed_path_is_rejected() {
        let (_, path) = minkowski();
        let rev = path.reversed();
        assert!(matches!(cone_from_path(&rev), Err(Error::PathNotPositive { .. })));
    }

    #[test]
    fn finsler_recovery_identity_and_dilation() {
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::randers(
            &base,
            MatrixField::constant(MatN::identity(2)),
            CovectorField::constant(VecN::from_slice(&[0.5, 0.0])),
        )
        .unwrap();
        let cone = ConeStructure::new(base.clone(), fam.clone()).unwrap();
        let rec = finsler_from_cone_slices(&cone);
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let t = rng.range(-1.0, 1.0);
            let p = base.point(&[rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]).unwrap();
            let w = rng.vector(2);
            let a = fam.eval(t, &p, &w).unwrap();
            let b = rec.eval(t, &p, &w).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        let p = base.origin();
        // Axis radii of the Randers slice: 2/3 forward, 2 backward.
        let slice = cone.cone_slice(0.0, &p);
        assert!((slice.radius(&VecN::from_slice(&[1.0, 0.0])).unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!((slice.radius(&VecN::from_slice(&[-1.0, 0.0])).unwrap() - 2.0).abs() < 1e-9);

        let dilated = cone.dilate(2.0).unwrap();
        let rec2 = finsler_from_cone_slices(&dilated);
        let w = VecN::from_slice(&[1.0, 0.0]);
        let half = rec2.eval(0.0, &p, &w).unwrap();
        assert!((half - 0.75).abs() < 1e-9, "gauge of 2K is F/2, got {half}");
    }

    #[test]
    fn probe_flat_single_crossings() {
        let (_, path) = minkowski();
        let base = path.base().clone();
        let rays: Vec<RayPoint> = (0..8)
            .map(|k| {
                let th = k as f64 * std::f64::consts::PI / 4.0;
                RayPoint::unit_euclidean(
                    base.origin(),
                    VecN::from_slice(&[th.cos(), th.sin()]),
                )
                .unwrap()
            })
            .collect();
        let report = cauchy_crossing_probe(&path, &rays, 2.0);
        assert!(report.all_single_crossing);
        assert!(report.all_completed);
        assert_eq!(report.label, "experimental");
    }
}
