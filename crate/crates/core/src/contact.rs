//! Contact-geometric test surface on ST*Sigma: Liouville pairings, contact
//! forms from unit co-sphere sections, Reeb-condition verification,
//! positivity margins of paths, skies and sky isotopies.
//!
//! Sign convention: all margins are stated on the ST*Sigma side. The
//! identification of the space of cone geodesics with ST*Sigma reverses the
//! coorientation, so skies of future-directed timelike curves move with
//! strictly NEGATIVE margins here, and cone-induced paths themselves have
//! strictly positive margins. Every report records this convention.

use serde::Serialize;

use crate::base::{BaseManifold, BasePoint, SpacetimeCurve, SpacetimeEvent};
use crate::directions::DirectionSet;
use crate::dynamics::{PositivePath, RayPoint};
use crate::error::{Error, Result};
use crate::finsler::FinslerFamily;
use crate::vecn::VecN;

/// FD step for d(alpha) along coordinate flows.
const DALPHA_FD_STEP: f64 = 1e-4;
/// Acceptable deviation of a contact sample from the unit co-sphere.
const CO_SPHERE_TOL: f64 = 1e-6;

pub const SIGN_CONVENTION: &str =
    "ST*Sigma side; rho_0 reverses coorientation: timelike skies have negative margins";

/// Tangent vector of T*Sigma at a point (p, v), split into base and fibre
/// components of the flat chart.
#[derive(Clone, Copy, Debug)]
pub struct PhaseVector {
    pub dp: VecN,
    pub dv: VecN,
}

impl PhaseVector {
    pub fn new(dp: VecN, dv: VecN) -> Self {
        PhaseVector { dp, dv }
    }
}

/// Liouville pairing lambda_v(u) = v(d pi (u)).
pub fn liouville_pairing(v: &VecN, u: &PhaseVector) -> f64 {
    v.dot(&u.dp)
}

/// Representative on the unit dual-Finsler co-sphere together with a frame
/// of the co-sphere tangent space at that point.
#[derive(Clone, Debug)]
pub struct ContactSample {
    pub ray: RayPoint,
    pub frame: Vec<PhaseVector>,
}

/// Build a contact sample at time t: normalize the covector onto
/// {F*_t = 1} and assemble a (2n-1)-frame of its tangent space from the
/// finite-difference gradient of F*.
pub fn contact_sample(
    fam: &FinslerFamily,
    base: &BaseManifold,
    t: f64,
    p: BasePoint,
    v: VecN,
) -> Result<ContactSample> {
    let ray = RayPoint::unit_dual(fam, t, p, v)?;
    let n = base.dim();
    let dim = 2 * n;

    // Gradient of (p, v) -> F*_t(p, v) in the full phase chart.
    let hp = DALPHA_FD_STEP * ray.p.coords().norm_inf().max(1.0);
    let hv = DALPHA_FD_STEP;
    let mut normal = vec![0.0; dim];
    for i in 0..n {
        let mut e = VecN::zeros(n);
        e[i] = hp;
        let pp = base.displace(&ray.p, &e);
        let pm = base.displace(&ray.p, &e.scale(-1.0));
        normal[i] = (fam.dual_norm(t, &pp, &ray.v)? - fam.dual_norm(t, &pm, &ray.v)?) / (2.0 * hp);
    }
    for i in 0..n {
        let mut vp = ray.v;
        let mut vm = ray.v;
        vp[i] += hv;
        vm[i] -= hv;
        normal[n + i] =
            (fam.dual_norm(t, &ray.p, &vp)? - fam.dual_norm(t, &ray.p, &vm)?) / (2.0 * hv);
    }
    let nn: f64 = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(nn > 0.0) {
        return Err(Error::Invalid("degenerate co-sphere normal".into()));
    }
    let normal: Vec<f64> = normal.iter().map(|x| x / nn).collect();

    // Coordinate directions projected off the normal; drop the most aligned
    // one and orthonormalize the rest.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()));
    let mut frame_flat: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    for &k in order.iter().take(dim - 1) {
        let mut cand = vec![0.0; dim];
        cand[k] = 1.0;
        for (i, c) in cand.iter_mut().enumerate() {
            *c -= normal[k] * normal[i] * if i == k { 0.0 } else { 1.0 };
        }
        cand[k] -= normal[k] * normal[k];
        for prev in &frame_flat {
            let proj: f64 = cand.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (c, q) in cand.iter_mut().zip(prev) {
                *c -= proj * q;
            }
        }
        let norm: f64 = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            frame_flat.push(cand.iter().map(|x| x / norm).collect());
        }
    }
    if frame_flat.len() != dim - 1 {
        return Err(Error::Invalid("could not frame the co-sphere tangent space".into()));
    }
    let frame = frame_flat
        .into_iter()
        .map(|flat| {
            PhaseVector::new(VecN::from_slice(&flat[..n]), VecN::from_slice(&flat[n..]))
        })
        .collect();
    Ok(ContactSample { ray, frame })
}

/// Evaluate the contact form alpha_t on a phase vector at the sample:
/// the Liouville pairing at the unit dual-Finsler representative.
pub fn contact_form_eval(
    fam: &FinslerFamily,
    t: f64,
    sample: &ContactSample,
    u: &PhaseVector,
) -> Result<f64> {
    let fs = fam.dual_norm(t, &sample.ray.p, &sample.ray.v)?;
    if (fs - 1.0).abs() > CO_SPHERE_TOL {
        return Err(Error::OffUnitCoSphere((fs - 1.0).abs()));
    }
    Ok(liouville_pairing(&sample.ray.v, u))
}

/// d(alpha)(x, y) by centered finite differences of the Liouville form
/// along constant coordinate extensions of x and y. The Liouville form is
/// affine in the chart, so the centered differences are exact here; the
/// FD realization keeps the check independent of that simplification.
fn d_alpha(at_v: &VecN, x: &PhaseVector, y: &PhaseVector) -> f64 {
    let h = DALPHA_FD_STEP;
    // X(lambda(Y)) at z: lambda_{z + h X}(Y) uses covector v + h X.dv.
    let x_of_ly = {
        let vp = *at_v + x.dv.scale(h);
        let vm = *at_v - x.dv.scale(h);
        (liouville_pairing(&vp, y) - liouville_pairing(&vm, y)) / (2.0 * h)
    };
    let y_of_lx = {
        let vp = *at_v + y.dv.scale(h);
        let vm = *at_v - y.dv.scale(h);
        (liouville_pairing(&vp, x) - liouville_pairing(&vm, x)) / (2.0 * h)
    };
    x_of_ly - y_of_lx
}

/// Reeb-condition report at a contact sample.
#[derive(Clone, Debug, Serialize)]
pub struct ReebReport {
    pub alpha_of_x: f64,
    pub max_dalpha_contraction: f64,
}

/// Verify alpha_t(X_t) = 1 and d(alpha_t)(X_t, .) = 0 on the co-sphere
/// frame, with X_t taken from a short unrenormalized integration of the
/// cogeodesic flow through the sample.
pub fn verify_reeb_conditions(
    fam: &FinslerFamily,
    base: &BaseManifold,
    t: f64,
    sample: &ContactSample,
) -> Result<ReebReport> {
    let delta = 1e-3;
    let x = flow_derivative(fam, base, t, &sample.ray, delta)?;
    verify_reeb_of(fam, t, sample, &x)
}

/// Same check against an explicitly supplied candidate field value.
pub fn verify_reeb_of(
    fam: &FinslerFamily,
    t: f64,
    sample: &ContactSample,
    x: &PhaseVector,
) -> Result<ReebReport> {
    let alpha_of_x = contact_form_eval(fam, t, sample, x)?;
    let mut worst = 0.0f64;
    for b in &sample.frame {
        worst = worst.max(d_alpha(&sample.ray.v, x, b).abs());
    }
    Ok(ReebReport { alpha_of_x, max_dalpha_contraction: worst })
}

/// d/ds at s = t of the cogeodesic flow through `ray`, as a phase vector,
/// by centered differences of two short unrenormalized integrations.
fn flow_derivative(
    fam: &FinslerFamily,
    base: &BaseManifold,
    t: f64,
    ray: &RayPoint,
    delta: f64,
) -> Result<PhaseVector> {
    let fine = delta / 8.0;
    let plus = crate::dynamics::integrate_cogeodesic(fam, base, ray, t, t + delta, fine)?;
    let minus = crate::dynamics::integrate_cogeodesic(fam, base, ray, t, t - delta, fine)?;
    let sp = plus.samples.last().unwrap();
    let sm = minus.samples.last().unwrap();
    let dp = base.delta(&sm.p, &sp.p).scale(1.0 / (2.0 * delta));
    let dv = (sp.v - sm.v).scale(1.0 / (2.0 * delta));
    Ok(PhaseVector::new(dp, dv))
}

/// Witness of contact nondegeneracy: |alpha ^ (d alpha)^(n-1)| evaluated on
/// the co-sphere frame, normalized by the frame Gram volume.
pub fn contact_nondegeneracy(sample: &ContactSample) -> f64 {
    let frame = &sample.frame;
    let k = frame.len();
    let v = &sample.ray.v;
    let alpha: Vec<f64> = frame.iter().map(|b| liouville_pairing(v, b)).collect();
    let mut da = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            da[i][j] = d_alpha(v, &frame[i], &frame[j]);
        }
    }
    let value = match k {
        1 => alpha[0],
        3 => {
            // alpha ^ d(alpha) on (b1, b2, b3).
            alpha[0] * da[1][2] - alpha[1] * da[0][2] + alpha[2] * da[0][1]
        }
        5 => {
            // alpha ^ d(alpha)^2 via the shuffle expansion.
            let mut total = 0.0;
            for a in 0..5 {
                let rest: Vec<usize> = (0..5).filter(|&i| i != a).collect();
                let sign_a = if a % 2 == 0 { 1.0 } else { -1.0 };
                // Pfaffian-style pairing of the remaining four indices.
                let (i, j, l, m) = (rest[0], rest[1], rest[2], rest[3]);
                let pair = da[i][j] * da[l][m] - da[i][l] * da[j][m] + da[i][m] * da[j][l];
                total += sign_a * alpha[a] * 2.0 * pair;
            }
            total
        }
        _ => f64::NAN,
    };
    // Frame is orthonormal by construction, Gram volume 1.
    value.abs()
}

/// Positivity margin of the path at (t, ray): the Liouville form evaluated
/// on the centered time-difference of the flow, at the representative
/// normalized onto the path's unit co-ball.
pub fn positivity_margin(path: &PositivePath, t: f64, ray: &RayPoint) -> Result<f64> {
    let delta = path.config().margin_delta.max(path.config().step);
    let base = path.base();
    if !path.is_reversed() {
        let arrived = path.apply(t, ray)?;
        let rep = path.normalize_unit_dual(t, &arrived)?;
        let plus = path.flow_between(&rep, t, t + delta)?;
        let minus = path.flow_between(&rep, t, t - delta)?;
        let dp = base.delta(&minus.p, &plus.p).scale(1.0 / (2.0 * delta));
        Ok(rep.v.dot(&dp))
    } else {
        // Inverse path: psi_s = phi_s^{-1}; differentiate the full pullback.
        let center = path.apply(t, ray)?;
        let rep = path.normalize_unit_dual(0.0, &center)?;
        let plus = path.apply(t + delta, ray)?;
        let minus = path.apply(t - delta, ray)?;
        let dp = base.delta(&minus.p, &plus.p).scale(1.0 / (2.0 * delta));
        Ok(rep.v.dot(&dp))
    }
}

/// The sky of an event: pull the fibre sphere over p back to time 0.
pub fn sky(path: &PositivePath, event: &SpacetimeEvent, m: usize) -> Result<Vec<RayPoint>> {
    let dirs = DirectionSet::canonical(path.base().dim(), m);
    let markers: Vec<VecN> = dirs.dirs().to_vec();
    sky_with_markers(path, event, &markers)
}

/// Sky samples for explicit fibre covectors at the event's base point.
pub fn sky_with_markers(
    path: &PositivePath,
    event: &SpacetimeEvent,
    markers: &[VecN],
) -> Result<Vec<RayPoint>> {
    markers
        .iter()
        .map(|u| {
            let ray = RayPoint::unit_euclidean(event.p, *u)?;
            path.apply_inverse(event.t, &ray)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CausalVerdict {
    /// All margins strictly negative in the ST*Sigma picture.
    TimelikeConsistent,
    /// All margins nonpositive within tolerance.
    CausalConsistent,
    NotCausal,
}

/// Default fibre sample count for skies on surfaces.
pub const DEFAULT_SKY_SAMPLES: usize = 64;

#[derive(Clone, Debug, Serialize)]
pub struct SkyIsotopyReport {
    /// margins[sample][marker], one row per interior curve sample.
    pub margins: Vec<Vec<f64>>,
    /// The sampled Legendrian spheres, one row per curve sample
    /// (including the endpoints, which carry no margin row).
    #[serde(skip)]
    pub spheres: Vec<Vec<RayPoint>>,
    pub min_margin: f64,
    pub max_margin: f64,
    pub min_abs_margin: f64,
    pub verdict: CausalVerdict,
    pub sign_convention: &'static str,
}

/// Margins of the sky isotopy along a sampled spacetime curve, one row per
/// interior curve sample, one column per fibre marker.
pub fn sky_isotopy_positivity(
    path: &PositivePath,
    curve: &SpacetimeCurve,
    m: usize,
) -> Result<SkyIsotopyReport> {
    let dirs = DirectionSet::canonical(path.base().dim(), m);
    let markers: Vec<Vec<VecN>> = curve.iter().map(|_| dirs.dirs().to_vec()).collect();
    sky_isotopy_with_markers(path, curve, &markers)
}

/// Same, with explicit per-sample marker covectors (all rows must have the
/// same length; marker k is tracked across neighbouring samples).
pub fn sky_isotopy_with_markers(
    path: &PositivePath,
    curve: &SpacetimeCurve,
    markers: &[Vec<VecN>],
) -> Result<SkyIsotopyReport> {
    if curve.len() < 3 {
        return Err(Error::BadCurve);
    }
    for k in 1..curve.len() {
        if !(curve[k].0 > curve[k - 1].0) {
            return Err(Error::BadCurve);
        }
    }
    if markers.len() != curve.len() {
        return Err(Error::DimensionMismatch { expected: curve.len(), got: markers.len() });
    }
    let base = path.base();
    let n_markers = markers[0].len();
    if markers.iter().any(|m| m.len() != n_markers) {
        return Err(Error::Invalid("marker rows must have equal length".into()));
    }
    // With one marker set shared by every sample, each sphere is computed
    // once and reused for the neighbouring differences.
    let shared = markers.iter().all(|m| {
        m.iter().zip(&markers[0]).all(|(a, b)| (*a - *b).is_zero())
    });
    let spheres: Vec<Vec<RayPoint>> = curve
        .iter()
        .zip(markers)
        .map(|((_, ev), row)| sky_with_markers(path, ev, row))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut min_m = f64::INFINITY;
    let mut max_m = f64::NEG_INFINITY;
    let mut min_abs = f64::INFINITY;
    for j in 1..curve.len() - 1 {
        let (s_prev, ev_prev) = curve[j - 1];
        let (s_next, ev_next) = curve[j + 1];
        let ds = s_next - s_prev;
        let mut row = Vec::with_capacity(n_markers);
        for k in 0..n_markers {
            let here = spheres[j][k];
            let (prev, next) = if shared {
                (spheres[j - 1][k], spheres[j + 1][k])
            } else {
                let u = markers[j][k];
                (
                    sky_with_markers(path, &ev_prev, &[u])?[0],
                    sky_with_markers(path, &ev_next, &[u])?[0],
                )
            };
            let dp = base.delta(&prev.p, &next.p).scale(1.0 / ds);
            let margin = here.v.dot(&dp);
            min_m = min_m.min(margin);
            max_m = max_m.max(margin);
            min_abs = min_abs.min(margin.abs());
            row.push(margin);
        }
        rows.push(row);
    }
    let tol = 1e-7;
    let verdict = if max_m < 0.0 {
        CausalVerdict::TimelikeConsistent
    } else if max_m <= tol {
        CausalVerdict::CausalConsistent
    } else {
        CausalVerdict::NotCausal
    };
    Ok(SkyIsotopyReport {
        margins: rows,
        spheres,
        min_margin: min_m,
        max_margin: max_m,
        min_abs_margin: min_abs,
        verdict,
        sign_convention: SIGN_CONVENTION,
    })
}
