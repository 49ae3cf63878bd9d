//! Independent oracles for the derived reference values: high-order finite
//! differences, brute-force maximization over dense boundary samples, grid
//! membership scans, convex hulls and bisection. Each oracle lives here in
//! test code and never calls the implementation path it is checking.

use lightcone_core::base::BaseManifold;
use lightcone_core::convex::{
    self, hausdorff_distance, is_convex, polar, support_function, StarBody,
};
use lightcone_core::directions::DirectionSet;
use lightcone_core::finsler::{CovectorField, FinslerFamily, MatrixField};
use lightcone_core::rng::SplitMix64;
use lightcone_core::vecn::{MatN, VecN};

// ---------------------------------------------------------------------
// Oracle helpers
// ---------------------------------------------------------------------

/// Richardson-extrapolated central second derivative of f at (i, j).
fn fd_hessian_entry<F: Fn(&VecN) -> f64>(f: &F, w: &VecN, i: usize, j: usize, h: f64) -> f64 {
    let d = |h: f64| -> f64 {
        if i == j {
            let mut wp = *w;
            let mut wm = *w;
            wp[i] += h;
            wm[i] -= h;
            (f(&wp) - 2.0 * f(w) + f(&wm)) / (h * h)
        } else {
            let mut wpp = *w;
            let mut wpm = *w;
            let mut wmp = *w;
            let mut wmm = *w;
            wpp[i] += h;
            wpp[j] += h;
            wpm[i] += h;
            wpm[j] -= h;
            wmp[i] -= h;
            wmp[j] += h;
            wmm[i] -= h;
            wmm[j] -= h;
            (f(&wpp) - f(&wpm) - f(&wmp) + f(&wmm)) / (4.0 * h * h)
        }
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn fd_gradient<F: Fn(&VecN) -> f64>(f: &F, w: &VecN, h: f64) -> VecN {
    let mut g = VecN::zeros(w.dim());
    for i in 0..w.dim() {
        let mut wp = *w;
        let mut wm = *w;
        wp[i] += h;
        wm[i] -= h;
        g[i] = (f(&wp) - f(&wm)) / (2.0 * h);
    }
    g
}

/// Brute-force dual norm: max of v(w) over 4096 boundary samples of the
/// unit sphere {F = 1}, with a parabolic vertex correction through the
/// best three samples.
fn brute_force_dual_norm<F: Fn(&VecN) -> f64>(f: &F, v: &VecN, m: usize) -> f64 {
    let mut vals = Vec::with_capacity(m);
    for i in 0..m {
        let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
        let u = VecN::from_slice(&[th.cos(), th.sin()]);
        vals.push(v.dot(&u) / f(&u));
    }
    let (mut best, mut best_val) = (0usize, f64::NEG_INFINITY);
    for (i, &g) in vals.iter().enumerate() {
        if g > best_val {
            best_val = g;
            best = i;
        }
    }
    let gm = vals[(best + m - 1) % m];
    let gp = vals[(best + 1) % m];
    let curv = 2.0 * best_val - gm - gp;
    if curv > 1e-14 {
        best_val + (gp - gm) * (gp - gm) / (8.0 * curv)
    } else {
        best_val
    }
}

/// Convex hull of planar points, Andrew monotone chain. Returns the hull
/// vertices in counterclockwise order.
fn convex_hull(points: &[VecN]) -> Vec<VecN> {
    let mut pts: Vec<VecN> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let cross = |o: &VecN, a: &VecN, b: &VecN| -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<VecN> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<VecN> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn petal_radial(u: &VecN) -> f64 {
    1.0 + 0.5 * (3.0 * u[1].atan2(u[0])).cos()
}

// ---------------------------------------------------------------------
// base_geometry oracles
// ---------------------------------------------------------------------

#[test]
fn randers_fundamental_tensor_vs_fd_oracle() {
    let base = BaseManifold::euclidean(2).unwrap();
    let fam = FinslerFamily::randers(
        &base,
        MatrixField::constant(MatN::identity(2)),
        CovectorField::constant(VecN::from_slice(&[0.5, 0.0])),
    )
    .unwrap();
    let p = base.origin();
    let w = VecN::from_slice(&[1.0, 0.0]);
    let g = fam.fundamental_tensor(0.0, &p, &w).unwrap();

    // Frozen values tabulated from the oracle below.
    assert!((g.matrix.get(0, 0) - 2.25).abs() < 1e-10);
    assert!((g.matrix.get(1, 1) - 1.5).abs() < 1e-10);
    assert!(g.matrix.get(0, 1).abs() < 1e-10);

    let half_sq = |w: &VecN| {
        let f = w.norm() + 0.5 * w[0];
        0.5 * f * f
    };
    for i in 0..2 {
        for j in 0..2 {
            let oracle = fd_hessian_entry(&half_sq, &w, i, j, 1e-3);
            assert!(
                (g.matrix.get(i, j) - oracle).abs() < 1e-6,
                "entry ({i},{j}): {} vs oracle {oracle}",
                g.matrix.get(i, j)
            );
        }
    }
}

#[test]
fn randers_legendre_vs_fd_gradient_oracle() {
    let base = BaseManifold::euclidean(2).unwrap();
    let fam = FinslerFamily::randers(
        &base,
        MatrixField::constant(MatN::identity(2)),
        CovectorField::constant(VecN::from_slice(&[0.5, 0.0])),
    )
    .unwrap();
    let p = base.origin();
    let half_sq = |w: &VecN| {
        let f = w.norm() + 0.5 * w[0];
        0.5 * f * f
    };
    let mut rng = SplitMix64::new(11);
    for _ in 0..20 {
        let w = rng.vector(2);
        let leg = fam.legendre(0.0, &p, &w).unwrap();
        let oracle = fd_gradient(&half_sq, &w, 1e-6);
        assert!((leg - oracle).norm() < 1e-6, "{leg:?} vs {oracle:?}");
    }
    // Frozen axis value: F grad F at (1,0) is (2.25, 0).
    let leg = fam.legendre(0.0, &p, &VecN::from_slice(&[1.0, 0.0])).unwrap();
    assert!((leg[0] - 2.25).abs() < 1e-12 && leg[1].abs() < 1e-12);
}

#[test]
fn dual_norm_vs_brute_force_100_random_covectors() {
    let base = BaseManifold::euclidean(2).unwrap();
    let p = base.origin();
    let randers = FinslerFamily::randers(
        &base,
        MatrixField::constant(MatN::identity(2)),
        CovectorField::constant(VecN::from_slice(&[0.5, 0.0])),
    )
    .unwrap();
    let riem = FinslerFamily::riemannian(
        &base,
        MatrixField::constant(MatN::diagonal(&[4.0, 1.0])),
    )
    .unwrap();

    let randers_f = |u: &VecN| u.norm() + 0.5 * u[0];
    let riem_f = |u: &VecN| (4.0 * u[0] * u[0] + u[1] * u[1]).sqrt();

    // Frozen axis values: 2/3 for the Randers drift, 1/2 for diag(4,1).
    let e1 = VecN::from_slice(&[1.0, 0.0]);
    assert!((randers.dual_norm(0.0, &p, &e1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((riem.dual_norm(0.0, &p, &e1).unwrap() - 0.5).abs() < 1e-12);

    let mut rng = SplitMix64::new(2024);
    for _ in 0..100 {
        let v = rng.vector(2);
        for (fam, f) in [(&randers, &randers_f as &dyn Fn(&VecN) -> f64), (&riem, &riem_f)] {
            let exact = fam.dual_norm(0.0, &p, &v).unwrap();
            let brute = brute_force_dual_norm(&f, &v, 4096);
            assert!(
                (exact - brute).abs() <= 1e-6 * exact.abs(),
                "dual norm {exact} vs brute {brute} at {v:?}"
            );
        }
    }
}

// ---------------------------------------------------------------------
// convex_duality oracles
// ---------------------------------------------------------------------

#[test]
fn support_function_vs_brute_force_boundary() {
    let e = StarBody::ellipsoid(MatN::diagonal(&[4.0, 1.0])).unwrap();
    // 4096 boundary samples of the ellipse.
    let mut pts = Vec::new();
    for i in 0..4096 {
        let th = 2.0 * std::f64::consts::PI * i as f64 / 4096.0;
        let u = VecN::from_slice(&[th.cos(), th.sin()]);
        let r = 1.0 / (4.0 * u[0] * u[0] + u[1] * u[1]).sqrt();
        pts.push(u.scale(r));
    }
    let mut rng = SplitMix64::new(5);
    for _ in 0..50 {
        let w = rng.vector(2);
        let h = support_function(&e, &w).unwrap();
        let brute = pts.iter().map(|x| x.dot(&w)).fold(f64::NEG_INFINITY, f64::max);
        assert!((h - brute).abs() < 1e-5 * h.abs().max(1.0), "{h} vs {brute}");
    }
    // Frozen example: h((1,0)) = 1/2.
    assert!((support_function(&e, &VecN::from_slice(&[1.0, 0.0])).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn ellipse_polar_matches_grid_membership_oracle() {
    let e = StarBody::ellipsoid(MatN::diagonal(&[4.0, 1.0])).unwrap();
    let pol = polar(&e).unwrap();
    // Oracle: w is in the polar iff max over sampled v in K of v(w) <= 1.
    let boundary: Vec<VecN> = (0..2048)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 2048.0;
            let u = VecN::from_slice(&[th.cos(), th.sin()]);
            u.scale(1.0 / (4.0 * u[0] * u[0] + u[1] * u[1]).sqrt())
        })
        .collect();
    let mut checked = 0;
    for ix in 0..256 {
        for iy in 0..256 {
            let w = VecN::from_slice(&[
                -3.0 + 6.0 * ix as f64 / 255.0,
                -2.0 + 4.0 * iy as f64 / 255.0,
            ]);
            if w.norm() < 1e-9 {
                continue;
            }
            let sup = boundary.iter().map(|v| v.dot(&w)).fold(f64::NEG_INFINITY, f64::max);
            // Skip the band where sampling cannot decide membership.
            if (sup - 1.0).abs() < 1e-3 {
                continue;
            }
            let inside = pol.contains(&w, 1e-9).unwrap();
            assert_eq!(inside, sup <= 1.0, "w = {w:?}, sup = {sup}");
            checked += 1;
        }
    }
    assert!(checked > 60_000, "oracle grid too sparse: {checked}");
    // Analytic form: the polar is {w^T diag(1/4, 1) w <= 1}.
    let expect = StarBody::ellipsoid(MatN::diagonal(&[0.25, 1.0])).unwrap();
    assert!(hausdorff_distance(&pol, &expect).unwrap() < 1e-9);
}

#[test]
fn petal_star_polar_equals_hull_polar() {
    let star = StarBody::from_radial_fn(2, petal_radial, false);
    assert!(!is_convex(&star));
    let pol = polar(&star).unwrap();

    // Oracle: hull of 4096 boundary points, polar of the hull via its
    // vertex support function.
    let boundary: Vec<VecN> = (0..4096)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 4096.0;
            let u = VecN::from_slice(&[th.cos(), th.sin()]);
            u.scale(petal_radial(&u))
        })
        .collect();
    let hull = convex_hull(&boundary);
    assert!(hull.len() > 3);
    let hull_polar_radius = |u: &VecN| {
        let h = hull.iter().map(|x| x.dot(u)).fold(f64::NEG_INFINITY, f64::max);
        1.0 / h
    };
    let mut worst = 0.0f64;
    for u in DirectionSet::canonical(2, 512).dirs() {
        let got = pol.radius(u).unwrap();
        let want = hull_polar_radius(u);
        worst = worst.max((got - want).abs());
    }
    assert!(worst <= 5e-3, "polar differs from hull polar by {worst}");
}

#[test]
fn bipolar_theorem_within_tolerance() {
    // Convex body without a support hint: forces the sampled route.
    let egg = StarBody::from_radial_fn(
        2,
        |u: &VecN| 1.0 / (1.0 + 0.3 * u[0] * u[0] + 0.1 * u[1]).sqrt(),
        true,
    );
    assert!(is_convex(&egg));
    let once = polar(&egg).unwrap();
    let twice = polar(&once).unwrap();
    let d = hausdorff_distance_512(&twice, &egg);
    assert!(d <= 5e-3, "bipolar error {d}");
}

fn hausdorff_distance_512(a: &StarBody, b: &StarBody) -> f64 {
    convex::hausdorff_distance_with(a, b, 512).unwrap()
}

#[test]
fn polar_monotonicity_by_support_domination() {
    let small = StarBody::ellipsoid(MatN::diagonal(&[4.0, 2.0])).unwrap();
    let big = StarBody::ellipsoid(MatN::diagonal(&[1.0, 0.5])).unwrap();
    // small ⊆ big by construction; polars must dominate the other way.
    let ps = polar(&small).unwrap();
    let pb = polar(&big).unwrap();
    for u in DirectionSet::canonical(2, 512).dirs() {
        let hs = support_function(&small, u).unwrap();
        let hb = support_function(&big, u).unwrap();
        assert!(hs <= hb + 1e-12);
        let qs = support_function(&ps, u).unwrap();
        let qb = support_function(&pb, u).unwrap();
        assert!(qb <= qs + 1e-9, "polar monotonicity violated at {u:?}");
    }
}

#[test]
fn hausdorff_ellipse_ball_by_direction_enumeration() {
    let e = StarBody::ellipsoid(MatN::diagonal(&[4.0, 1.0])).unwrap();
    let b = StarBody::ball(2, 1.0);
    // Dense enumeration oracle with closed-form supports.
    let mut brute = 0.0f64;
    for i in 0..4096 {
        let th = 2.0 * std::f64::consts::PI * i as f64 / 4096.0;
        let u = VecN::from_slice(&[th.cos(), th.sin()]);
        let he = (0.25 * u[0] * u[0] + u[1] * u[1]).sqrt();
        brute = brute.max((he - 1.0).abs());
    }
    assert!((brute - 0.5).abs() < 1e-12);
    let d = hausdorff_distance(&e, &b).unwrap();
    assert!((d - brute).abs() < 1e-9, "{d} vs {brute}");
}

#[test]
fn lipschitz_randers_drift_stable_under_step_halving() {
    // Co-balls of F with b(t) = (t/4, 0): anisotropic drifting family.
    let base = BaseManifold::euclidean(2).unwrap();
    let field = move |c: &[f64]| {
        let t = c[0];
        let fam = FinslerFamily::randers(
            &base,
            MatrixField::constant(MatN::identity(2)),
            CovectorField::constant(VecN::from_slice(&[t / 4.0, 0.0])),
        )
        .unwrap();
        let p = BaseManifold::euclidean(2).unwrap().origin();
        StarBody::from_radial_and_support(
            2,
            {
                let fam = fam.clone();
                move |u: &VecN| 1.0 / fam.dual_norm(t, &p, u).unwrap()
            },
            move |u: &VecN| fam.eval_or_zero(t, &p, u),
            true,
        )
    };
    let est = convex::lipschitz_estimate(&field, &[(0.0, 1.0)], 0.1).unwrap();
    let est_half = convex::lipschitz_estimate(&field, &[(0.0, 1.0)], 0.05).unwrap();
    assert!(est.is_finite() && est > 0.0);
    assert!(
        (est - est_half).abs() <= 0.1 * est.abs(),
        "estimate unstable: {est} vs {est_half}"
    );
}

// ---------------------------------------------------------------------
// cone slice oracles
// ---------------------------------------------------------------------

#[test]
fn randers_cone_slice_axis_radii_by_bisection() {
    let base = BaseManifold::euclidean(2).unwrap();
    let fam = FinslerFamily::randers(
        &base,
        MatrixField::constant(MatN::identity(2)),
        CovectorField::constant(VecN::from_slice(&[0.5, 0.0])),
    )
    .unwrap();
    let cone = lightcone_core::cone::ConeStructure::new(base.clone(), fam.clone()).unwrap();
    let slice = cone.cone_slice(0.0, &base.origin());

    // Bisection oracle: solve F(r u) = 1 on r in (0, 8).
    let gauge_radius = |u: &VecN| {
        let f = |r: f64| fam.eval(0.0, &base.origin(), &u.scale(r)).unwrap() - 1.0;
        let (mut lo, mut hi) = (1e-9, 8.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let plus = VecN::from_slice(&[1.0, 0.0]);
    let minus = VecN::from_slice(&[-1.0, 0.0]);
    assert!((gauge_radius(&plus) - 2.0 / 3.0).abs() < 1e-9);
    assert!((gauge_radius(&minus) - 2.0).abs() < 1e-9);
    assert!((slice.radius(&plus).unwrap() - gauge_radius(&plus)).abs() < 1e-9);
    assert!((slice.radius(&minus).unwrap() - gauge_radius(&minus)).abs() < 1e-9);
}

#[test]
fn g_eval_randers_co_ball_support_oracle() {
    let base = BaseManifold::euclidean(2).unwrap();
    let fam = FinslerFamily::randers(
        &base,
        MatrixField::constant(MatN::identity(2)),
        CovectorField::constant(VecN::from_slice(&[0.5, 0.0])),
    )
    .unwrap();
    let famc = fam.clone();
    let basec = base.clone();
    let space = lightcone_core::cone::LorentzFinslerSpace::from_co_ball_field(
        base.clone(),
        move |t, p| {
            let fr = famc.clone();
            let fh = famc.clone();
            let (pr, ph) = (*p, *p);
            StarBody::from_radial_and_support(
                2,
                move |u: &VecN| 1.0 / fr.dual_norm(t, &pr, u).unwrap(),
                move |u: &VecN| fh.eval_or_zero(t, &ph, u),
                true,
            )
        },
    );
    // Brute-force support of {F* <= 1} at w = (1,0) over dense directions.
    let w = VecN::from_slice(&[1.0, 0.0]);
    let mut brute = f64::NEG_INFINITY;
    for i in 0..8192 {
        let th = 2.0 * std::f64::consts::PI * i as f64 / 8192.0;
        let u = VecN::from_slice(&[th.cos(), th.sin()]);
        let r = 1.0 / fam.dual_norm(0.0, &basec.origin(), &u).unwrap();
        brute = brute.max(u.scale(r).dot(&w));
    }
    let g = space.g_eval(
        0.0,
        &basec.origin(),
        &lightcone_core::base::SpacetimeVector::new(1.0, w),
    );
    // G = 1 - F((1,0)) = -0.5 by Legendre duality of the co-ball support.
    assert!((g - (1.0 - brute)).abs() < 1e-6, "g {g} vs 1 - brute {}", 1.0 - brute);
    assert!((g + 0.5).abs() < 1e-7, "frozen value -1/2, got {g}");
}
