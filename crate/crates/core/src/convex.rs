//! Fibre-wise star-shaped bodies and convex polar duality.
//!
//! A [`StarBody`] is star-shaped around the origin and is represented either
//! by radii sampled over the canonical direction set of its dimension or by
//! a closed-form radial callable. Bodies constructed from exact data carry a
//! support-function shortcut so that polar pairs built from closed forms
//! stay exact instead of degrading to sampling accuracy; everything else
//! goes through sampled maximization with local refinement.
//!
//! The polar K° = { w : v(w) <= 1 for all v in K } is always convex and
//! coincides with the polar of the convex hull, so `polar` accepts
//! non-convex inputs. The support-based Hausdorff distance is only valid
//! for convex bodies and rejects anything else.

use std::sync::Arc;

use crate::directions::{refine_direction_max, DirectionSet};
use crate::error::{Error, Result};
use crate::vecn::{MatN, VecN};

/// Relative tolerance of the midpoint convexity test.
const CONVEXITY_TOL: f64 = 1e-9;
/// Angular tolerance for support refinement on callable bodies.
const SUPPORT_REFINE_TOL: f64 = 1e-10;

type RadialFn = Arc<dyn Fn(&VecN) -> f64 + Send + Sync>;

#[derive(Clone)]
enum RadialRep {
    /// Radii over `DirectionSet::canonical(dim, radii.len())`.
    Samples { dirs: Arc<DirectionSet>, radii: Arc<Vec<f64>> },
    /// Radius as a function of a unit direction.
    Callable(RadialFn),
}

#[derive(Clone)]
pub struct StarBody {
    dim: usize,
    rep: RadialRep,
    /// Exact support function on unit directions, when known.
    support_hint: Option<RadialFn>,
    /// Convexity known at construction (balls, ellipsoids, polars, ...).
    known_convex: bool,
}

impl StarBody {
    pub fn ball(dim: usize, r: f64) -> Self {
        StarBody {
            dim,
            rep: RadialRep::Callable(Arc::new(move |_| r)),
            support_hint: Some(Arc::new(move |_| r)),
            known_convex: true,
        }
    }

    /// The set { x : x^T A x <= 1 } for symmetric positive definite A.
    pub fn ellipsoid(a: MatN) -> Result<Self> {
        if !a.is_positive_definite() {
            return Err(Error::Invalid("ellipsoid matrix must be positive definite".into()));
        }
        let inv = a.inverse().ok_or_else(|| Error::Invalid("singular ellipsoid matrix".into()))?;
        let dim = a.dim();
        Ok(StarBody {
            dim,
            rep: RadialRep::Callable(Arc::new(move |u| 1.0 / a.quadratic(u).sqrt())),
            support_hint: Some(Arc::new(move |u| inv.quadratic(u).sqrt())),
            known_convex: true,
        })
    }

    /// Body from a radial callable over unit directions.
    pub fn from_radial_fn<F: Fn(&VecN) -> f64 + Send + Sync + 'static>(
        dim: usize,
        f: F,
        known_convex: bool,
    ) -> Self {
        StarBody { dim, rep: RadialRep::Callable(Arc::new(f)), support_hint: None, known_convex }
    }

    /// Radial callable plus an exact support function on unit directions.
    pub fn from_radial_and_support<F, G>(dim: usize, f: F, h: G, known_convex: bool) -> Self
    where
        F: Fn(&VecN) -> f64 + Send + Sync + 'static,
        G: Fn(&VecN) -> f64 + Send + Sync + 'static,
    {
        StarBody {
            dim,
            rep: RadialRep::Callable(Arc::new(f)),
            support_hint: Some(Arc::new(h)),
            known_convex,
        }
    }

    /// Body from radii over the canonical direction set of the dimension.
    /// At least 256 samples for dim >= 2 (the canonical pair for dim 1).
    pub fn from_samples(dim: usize, radii: Vec<f64>) -> Result<Self> {
        if dim >= 2 && radii.len() < 256 {
            return Err(Error::Invalid(format!(
                "sampled bodies need at least 256 directions, got {}",
                radii.len()
            )));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::BadRadii);
        }
        let dirs = Arc::new(DirectionSet::canonical(dim, radii.len()));
        if dirs.len() != radii.len() {
            return Err(Error::Invalid(format!(
                "canonical direction set of dim {dim} has {} directions, got {} radii",
                dirs.len(),
                radii.len()
            )));
        }
        Ok(StarBody {
            dim,
            rep: RadialRep::Samples { dirs, radii: Arc::new(radii) },
            support_hint: None,
            known_convex: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.rep, RadialRep::Samples { .. })
    }

    /// Radius in direction u (not necessarily unit).
    ///
    /// Sampled bodies are interpreted as the star polygon through their
    /// boundary points for n = 2 and by nearest sampled direction for
    /// n >= 3.
    pub fn radius(&self, u: &VecN) -> Result<f64> {
        let unit = u.normalized().ok_or(Error::ZeroVector("radius"))?;
        match &self.rep {
            RadialRep::Callable(f) => {
                let r = f(&unit);
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::BadRadii);
                }
                Ok(r)
            }
            RadialRep::Samples { dirs, radii } => match self.dim {
                1 => {
                    let i = if unit[0] > 0.0 { 0 } else { 1 };
                    Ok(radii[i])
                }
                2 => {
                    let m = radii.len();
                    let th = unit[1].atan2(unit[0]).rem_euclid(2.0 * std::f64::consts::PI);
                    let fi = th * m as f64 / (2.0 * std::f64::consts::PI);
                    let i = (fi.floor() as usize) % m;
                    let j = (i + 1) % m;
                    let xi = dirs.dirs()[i].scale(radii[i]);
                    let xj = dirs.dirs()[j].scale(radii[j]);
                    let d = xj - xi;
                    let denom = unit[0] * d[1] - unit[1] * d[0];
                    if denom.abs() < 1e-14 {
                        return Ok(radii[i].max(radii[j]));
                    }
                    let cross = xi[0] * xj[1] - xi[1] * xj[0];
                    Ok(cross / denom)
                }
                _ => {
                    let mut best = 0usize;
                    let mut best_dot = f64::NEG_INFINITY;
                    for (i, d) in dirs.dirs().iter().enumerate() {
                        let dd = d.dot(&unit);
                        if dd > best_dot {
                            best_dot = dd;
                            best = i;
                        }
                    }
                    Ok(radii[best])
                }
            },
        }
    }

    /// Membership test |x| <= r(x/|x|), with relative tolerance.
    pub fn contains(&self, x: &VecN, tol: f64) -> Result<bool> {
        if x.is_zero() {
            return Ok(true);
        }
        let r = self.radius(x)?;
        Ok(x.norm() <= r * (1.0 + tol))
    }

    /// Support function on unit directions.
    fn support_unit(&self, unit: &VecN) -> f64 {
        if let Some(h) = &self.support_hint {
            return h(unit);
        }
        match &self.rep {
            RadialRep::Samples { dirs, radii } => {
                let mut best = f64::NEG_INFINITY;
                for (i, d) in dirs.dirs().iter().enumerate() {
                    best = best.max(radii[i] * d.dot(unit));
                }
                best
            }
            RadialRep::Callable(f) => {
                let count = if self.known_convex {
                    match self.dim {
                        1 => 2,
                        2 => 64,
                        _ => 512,
                    }
                } else {
                    DirectionSet::default_count(self.dim)
                };
                let set = DirectionSet::canonical(self.dim, count);
                let objective = |u: &VecN| f(u) * u.dot(unit);
                let (i, _) = set.argmax(&objective);
                if self.dim == 1 {
                    return objective(&set.dirs()[i]);
                }
                let width = match self.dim {
                    2 => 2.0 * std::f64::consts::PI / count as f64,
                    _ => 4.0 / (count as f64).sqrt(),
                };
                refine_direction_max(objective, &set.dirs()[i], width, SUPPORT_REFINE_TOL).value
            }
        }
    }

    /// Resample onto the canonical direction set with `m` directions.
    pub fn resample(&self, m: usize) -> Result<StarBody> {
        let set = DirectionSet::canonical(self.dim, m);
        let radii: Result<Vec<f64>> = set.dirs().iter().map(|u| self.radius(u)).collect();
        let mut body = StarBody::from_samples(self.dim, radii?)?;
        body.known_convex = self.known_convex;
        Ok(body)
    }

    /// The scaled body lambda K.
    pub fn scale(&self, lambda: f64) -> Result<StarBody> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Invalid("scale factor must be positive".into()));
        }
        let rep = match &self.rep {
            RadialRep::Samples { dirs, radii } => RadialRep::Samples {
                dirs: dirs.clone(),
                radii: Arc::new(radii.iter().map(|r| r * lambda).collect()),
            },
            RadialRep::Callable(f) => {
                let f = f.clone();
                RadialRep::Callable(Arc::new(move |u| lambda * f(u)))
            }
        };
        let support_hint = self.support_hint.clone().map(|h| {
            let h2: RadialFn = Arc::new(move |u: &VecN| lambda * h(u));
            h2
        });
        Ok(StarBody { dim: self.dim, rep, support_hint, known_convex: self.known_convex })
    }

    /// The product [-a, a] x K, one dimension up, first axis the interval.
    pub fn product_interval(&self, a: f64) -> Result<StarBody> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Invalid("interval half-width must be positive".into()));
        }
        let inner = self.clone();
        let dim = self.dim + 1;
        let radial = move |u: &VecN| {
            let u0 = u[0];
            let tail = u.tail();
            let tn = tail.norm();
            let from_interval = if u0.abs() < 1e-300 { f64::INFINITY } else { a / u0.abs() };
            let from_body = if tn < 1e-300 {
                f64::INFINITY
            } else {
                inner.radius(&tail).unwrap_or(f64::INFINITY) / tn
            };
            from_interval.min(from_body)
        };
        let support_inner = self.clone();
        let support = move |u: &VecN| {
            let tail = u.tail();
            let body_part = if tail.is_zero() {
                0.0
            } else {
                support_inner.support_unit(&tail.normalized().unwrap()) * tail.norm()
            };
            a * u[0].abs() + body_part
        };
        Ok(StarBody {
            dim,
            rep: RadialRep::Callable(Arc::new(radial)),
            support_hint: Some(Arc::new(support)),
            known_convex: self.known_convex,
        })
    }

    /// CSV dump of (direction, radius) rows over `m` canonical directions.
    pub fn to_csv(&self, m: usize) -> Result<String> {
        let set = DirectionSet::canonical(self.dim, m);
        let mut out = String::new();
        for i in 0..self.dim {
            out.push_str(&format!("u{}", i + 1));
            out.push(',');
        }
        out.push_str("radius\n");
        for u in set.dirs() {
            for i in 0..self.dim {
                out.push_str(&format!("{},", u[i]));
            }
            out.push_str(&format!("{}\n", self.radius(u)?));
        }
        Ok(out)
    }
}

/// Support function h_K(w) = max over K of the pairing v(w).
pub fn support_function(body: &StarBody, w: &VecN) -> Result<f64> {
    let unit = w.normalized().ok_or(Error::ZeroVector("support_function"))?;
    Ok(body.support_unit(&unit) * w.norm())
}

/// Polar body K° = { w : v(w) <= 1 for all v in K }.
///
/// The radial function of the polar is 1/h_K; when K is known convex the
/// polar additionally carries the exact support h_{K°} = 1/r_K (the gauge
/// of K). Polars are convex regardless of the input.
pub fn polar(body: &StarBody) -> Result<StarBody> {
    let probe = DirectionSet::canonical(body.dim, DirectionSet::default_count(body.dim).min(256));
    for u in probe.dirs() {
        let h = body.support_unit(u);
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::OriginNotInterior(h));
        }
    }
    let for_radial = body.clone();
    let radial = move |u: &VecN| 1.0 / for_radial.support_unit(u);
    let support_hint: Option<RadialFn> = if body.known_convex {
        let for_support = body.clone();
        Some(Arc::new(move |u: &VecN| {
            1.0 / for_support.radius(u).unwrap_or(f64::INFINITY)
        }))
    } else {
        None
    };
    Ok(StarBody {
        dim: body.dim,
        rep: RadialRep::Callable(Arc::new(radial)),
        support_hint,
        known_convex: true,
    })
}

/// Midpoint-sampling convexity test with relative tolerance 1e-9.
pub fn is_convex(body: &StarBody) -> bool {
    if body.known_convex {
        return true;
    }
    let m = match body.dim {
        1 => return true,
        2 => 512,
        _ => 1024,
    };
    let set = DirectionSet::canonical(body.dim, m);
    let pts: Vec<VecN> = set
        .dirs()
        .iter()
        .map(|u| u.scale(body.radius(u).unwrap_or(f64::NAN)))
        .collect();
    if pts.iter().any(|x| !x.is_finite()) {
        return false;
    }
    // Tolerance for sampled bodies in n >= 3 is widened by the sampling
    // resolution of the nearest-direction radial.
    let tol = if body.dim >= 3 && body.is_sampled() {
        (4.0 / (m as f64).sqrt()).powi(2)
    } else {
        CONVEXITY_TOL
    };
    let mut stride = 1;
    while stride <= m / 2 {
        for i in 0..m {
            let j = (i + stride) % m;
            let mid = (pts[i] + pts[j]).scale(0.5);
            if mid.norm() < 1e-12 {
                continue;
            }
            match body.contains(&mid, tol) {
                Ok(true) => {}
                _ => return false,
            }
        }
        stride *= 2;
    }
    true
}

/// Hausdorff distance between convex bodies via support functions.
pub fn hausdorff_distance(k1: &StarBody, k2: &StarBody) -> Result<f64> {
    if k1.dim != k2.dim {
        return Err(Error::DimensionMismatch { expected: k1.dim, got: k2.dim });
    }
    if !is_convex(k1) || !is_convex(k2) {
        return Err(Error::NonConvex);
    }
    let set = DirectionSet::canonical(k1.dim, DirectionSet::default_count(k1.dim));
    let mut worst = 0.0f64;
    for u in set.dirs() {
        worst = worst.max((k1.support_unit(u) - k2.support_unit(u)).abs());
    }
    Ok(worst)
}

/// Hausdorff distance over an explicit direction count.
pub fn hausdorff_distance_with(k1: &StarBody, k2: &StarBody, directions: usize) -> Result<f64> {
    if !is_convex(k1) || !is_convex(k2) {
        return Err(Error::NonConvex);
    }
    let set = DirectionSet::canonical(k1.dim, directions);
    let mut worst = 0.0f64;
    for u in set.dirs() {
        worst = worst.max((k1.support_unit(u) - k2.support_unit(u)).abs());
    }
    Ok(worst)
}

/// Largest two-point Hausdorff quotient of a body field over a box region.
///
/// The region is gridded with spacing `step` per axis; only axis-adjacent
/// grid pairs enter the quotient. Every body in the region must be convex.
pub fn lipschitz_estimate<F>(field: F, region: &[(f64, f64)], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> StarBody,
{
    lipschitz_estimate_with(field, region, step, 0)
}

/// `lipschitz_estimate` with an explicit Hausdorff direction count
/// (0 selects the canonical default for the fibre dimension).
pub fn lipschitz_estimate_with<F>(
    field: F,
    region: &[(f64, f64)],
    step: f64,
    directions: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> StarBody,
{
    if region.is_empty() || !(step > 0.0) {
        return Err(Error::Invalid("region must be non-empty with positive step".into()));
    }
    let axes: Vec<Vec<f64>> = region
        .iter()
        .map(|&(lo, hi)| {
            let mut xs = vec![lo];
            let mut x = lo + step;
            while x <= hi + 1e-12 {
                xs.push(x.min(hi));
                x += step;
            }
            xs
        })
        .collect();
    let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let total: usize = dims.iter().product();
    let coords_of = |mut idx: usize| -> Vec<f64> {
        let mut c = Vec::with_capacity(dims.len());
        for (axis, d) in axes.iter().zip(&dims) {
            c.push(axis[idx % d]);
            idx /= d;
        }
        c
    };
    let mut bodies: Vec<StarBody> = Vec::with_capacity(total);
    for idx in 0..total {
        let body = field(&coords_of(idx));
        if !is_convex(&body) {
            return Err(Error::NonConvex);
        }
        bodies.push(body);
    }
    let fibre_dim = bodies.first().map(|b| b.dim()).unwrap_or(2);
    let count = if directions == 0 {
        DirectionSet::default_count(fibre_dim)
    } else {
        directions
    };
    let mut worst = 0.0f64;
    for idx in 0..total {
        let c = coords_of(idx);
        let mut offset = 1usize;
        for (ax, d) in dims.iter().enumerate() {
            let pos = (idx / offset) % d;
            if pos + 1 < *d {
                let jdx = idx + offset;
                let cj = coords_of(jdx);
                let dist: f64 = c
                    .iter()
                    .zip(&cj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist > 0.0 {
                    let dh = hausdorff_distance_with(&bodies[idx], &bodies[jdx], count)?;
                    worst = worst.max(dh / dist);
                }
            }
            offset *= d;
            let _ = ax;
        }
    }
    if !worst.is_finite() {
        return Err(Error::Invalid("Lipschitz estimate diverged".into()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_of_unit_ball() {
        let b = StarBody::ball(2, 1.0);
        let h = support_function(&b, &VecN::from_slice(&[0.0, 3.0])).unwrap();
        assert!((h - 3.0).abs() < 1e-12);
    }

    #[test]
    fn support_of_ellipse_closed_form_and_zero_direction() {
        let e = StarBody::ellipsoid(MatN::diagonal(&[4.0, 1.0])).unwrap();
        let h = support_function(&e, &VecN::from_slice(&[1.0, 0.0])).unwrap();
        assert!((h - 0.5).abs() < 1e-12);
        assert!(support_function(&e, &VecN::zeros(2)).is_err());
    }

    #[test]
    fn degenerate_radii_rejected() {
        assert!(StarBody::from_samples(2, vec![1.0; 512]).is_ok());
        let mut radii = vec![1.0; 512];
        radii[7] = 0.0;
        assert!(StarBody::from_samples(2, radii).is_err());
        let mut radii = vec![1.0; 512];
        radii[3] = f64::INFINITY;
        assert!(StarBody::from_samples(2, radii).is_err());
    }

    #[test]
    fn ball_is_self_polar() {
        let b = StarBody::ball(2, 1.0);
        let p = polar(&b).unwrap();
        for u in DirectionSet::canonical(2, 64).dirs() {
            assert!((p.radius(u).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_polar_is_inverse_form() {
        // {v^T diag(4,1) v <= 1}° = {w^T diag(1/4,1) w <= 1}.
        let e = StarBody::ellipsoid(MatN::diagonal(&[4.0, 1.0])).unwrap();
        let p = polar(&e).unwrap();
        let expect = StarBody::ellipsoid(MatN::diagonal(&[0.25, 1.0])).unwrap();
        let d = hausdorff_distance(&p, &expect).unwrap();
        assert!(d < 1e-9, "polar far from analytic inverse form: {d:e}");
    }

    #[test]
    fn square_polar_is_cross_polytope() {
        // conv{(+-1, +-1)} has radial 1/max(|u1|,|u2|) and support |u1|+|u2|.
        let square = StarBody::from_radial_and_support(
            2,
            |u: &VecN| 1.0 / u[0].abs().max(u[1].abs()),
            |u: &VecN| u[0].abs() + u[1].abs(),
            true,
        );
        let p = polar(&square).unwrap();
        for u in DirectionSet::canonical(2, 128).dirs() {
            let expect = 1.0 / (u[0].abs() + u[1].abs());
            assert!((p.radius(u).unwrap() - expect).abs() < 1e-10);
        }
        // Support of the cross polytope is max(|u1|, |u2|).
        let h = support_function(&p, &VecN::from_slice(&[1.0, 0.0])).unwrap();
        assert!((h - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hausdorff_examples() {
        let b1 = StarBody::ball(2, 1.0);
        let b2 = StarBody::ball(2, 2.0);
        assert_eq!(hausdorff_distance(&b1, &b1).unwrap(), 0.0);
        assert!((hausdorff_distance(&b1, &b2).unwrap() - 1.0).abs() < 1e-12);
        let e = StarBody::ellipsoid(MatN::diagonal(&[4.0, 1.0])).unwrap();
        let d = hausdorff_distance(&e, &b1).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
    }

    #[test]
    fn hausdorff_rejects_nonconvex() {
        let star = StarBody::from_radial_fn(
            2,
            |u: &VecN| 1.0 + 0.5 * (3.0 * u[1].atan2(u[0])).cos(),
            false,
        );
        let ball = StarBody::ball(2, 1.0);
        assert!(matches!(hausdorff_distance(&star, &ball), Err(Error::NonConvex)));
    }

    #[test]
    fn convexity_verdicts() {
        assert!(is_convex(&StarBody::ball(2, 1.0)));
        let square = StarBody::from_radial_fn(
            2,
            |u: &VecN| 1.0 / u[0].abs().max(u[1].abs()),
            false,
        );
        assert!(is_convex(&square));
        let star = StarBody::from_radial_fn(
            2,
            |u: &VecN| 1.0 + 0.5 * (3.0 * u[1].atan2(u[0])).cos(),
            false,
        );
        assert!(!is_convex(&star));
    }

    #[test]
    fn polar_scaling() {
        let e = StarBody::ellipsoid(MatN::diagonal(&[2.0, 0.5])).unwrap();
        let lhs = polar(&e.scale(3.0).unwrap()).unwrap();
        let rhs = polar(&e).unwrap().scale(1.0 / 3.0).unwrap();
        for u in DirectionSet::canonical(2, 64).dirs() {
            assert!((lhs.radius(u).unwrap() - rhs.radius(u).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn lipschitz_constant_field_is_zero() {
        let est = lipschitz_estimate(|_| StarBody::ball(2, 1.0), &[(0.0, 1.0)], 0.25).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn lipschitz_growing_ball_is_one() {
        // Unit co-balls of F_t = (1+t) Euclidean have radius 1+t.
        let est = lipschitz_estimate(
            |c: &[f64]| StarBody::ball(2, 1.0 + c[0]),
            &[(0.0, 1.0)],
            0.1,
        )
        .unwrap();
        assert!((est - 1.0).abs() < 1e-9, "estimate {est}");
    }

    #[test]
    fn product_interval_support_and_radial() {
        let k = StarBody::ball(2, 2.0);
        let a = k.product_interval(1.0).unwrap();
        assert_eq!(a.dim(), 3);
        // Along the interval axis.
        let r0 = a.radius(&VecN::from_slice(&[1.0, 0.0, 0.0])).unwrap();
        assert!((r0 - 1.0).abs() < 1e-12);
        // Along a body axis.
        let r1 = a.radius(&VecN::from_slice(&[0.0, 1.0, 0.0])).unwrap();
        assert!((r1 - 2.0).abs() < 1e-12);
        // Support is additive for the product.
        let h = support_function(&a, &VecN::from_slice(&[1.0, 1.0, 0.0])).unwrap();
        assert!((h - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = StarBody::ball(2, 1.0).to_csv(8).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "u1,u2,radius");
        assert_eq!(lines.len(), 9);
    }
}
