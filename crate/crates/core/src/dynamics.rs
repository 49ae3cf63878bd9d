//! Flow side of the engine: cogeodesic integration on T*Sigma, positive
//! paths of contactomorphisms, and Lagrangian null geodesics.
//!
//! The canonical geodesic producer is the cotangent side: the Hamiltonian
//! flow of H_t = F*_t (1-homogeneous, exact fibre derivative via the
//! dual-norm maximizer) integrated with a classical fixed-step 4th-order
//! scheme. Projectivized flows renormalize the covector representative to
//! unit Euclidean norm after every accepted step; 1-homogeneity makes the
//! ray image independent of the representative, so renormalization only
//! controls floating-point drift. The Lagrangian integrator exists as an
//! independent cross-check and obtains its spray coefficients from finite
//! differences of L = dt^2 - F_t^2.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::base::{BaseManifold, BasePoint, SpacetimeEvent, SpacetimeVector};
use crate::cone::ConeStructure;
use crate::directions::{refine_direction_max, DirectionSet};
use crate::error::{Error, Result};
use crate::finsler::FinslerFamily;
use crate::vecn::{MatN, VecN};

/// Covector norms outside this window abort an integration.
const BLOWUP_LO: f64 = 1e-8;
const BLOWUP_HI: f64 = 1e8;
/// Relative step for first-order finite differences of Hamiltonian data.
const FD_GRAD_STEP: f64 = 5e-6;
/// Tolerance of the unit-dual-Finsler normalization invariant.
const UNIT_DUAL_TOL: f64 = 1e-8;

/// Fixed-step integrator configuration.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
    /// Half-window of centered time differences of the flow (margins).
    pub margin_delta: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { step: 1e-3, horizon: 10.0, margin_delta: 1e-3 }
    }
}

/// Normalization contract of a ray representative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RayNormalization {
    UnitEuclidean,
    /// |F*_t(p, v) - 1| <= 1e-8 at the tagged time.
    UnitDualFinsler(f64),
}

/// Point of ST*Sigma with a chosen covector representative.
#[derive(Clone, Copy, Debug)]
pub struct RayPoint {
    pub p: BasePoint,
    pub v: VecN,
    pub normalization: RayNormalization,
}

impl RayPoint {
    /// Representative scaled to unit Euclidean covector norm.
    pub fn unit_euclidean(p: BasePoint, v: VecN) -> Result<Self> {
        let unit = v.normalized().ok_or(Error::ZeroVector("RayPoint"))?;
        Ok(RayPoint { p, v: unit, normalization: RayNormalization::UnitEuclidean })
    }

    /// Representative on the unit dual-Finsler co-sphere at time t.
    pub fn unit_dual(fam: &FinslerFamily, t: f64, p: BasePoint, v: VecN) -> Result<Self> {
        let fs = fam.dual_norm(t, &p, &v)?;
        let scaled = v.scale(1.0 / fs);
        let check = fam.dual_norm(t, &p, &scaled)?;
        if (check - 1.0).abs() > UNIT_DUAL_TOL {
            return Err(Error::OffUnitCoSphere((check - 1.0).abs()));
        }
        Ok(RayPoint { p, v: scaled, normalization: RayNormalization::UnitDualFinsler(t) })
    }

    /// Base distance plus covector angle; zero iff the rays coincide.
    pub fn ray_distance(&self, other: &RayPoint, base: &BaseManifold) -> f64 {
        base.distance(&self.p, &other.p) + self.v.angle_to(&other.v)
    }
}

/// Generator data of a positive path.
#[derive(Clone)]
pub enum Generator {
    /// Cone-induced: H_t = F*_t of a Finsler family.
    DualFinsler(FinslerFamily),
    /// Positive contact Hamiltonian relative to the reference contact form
    /// of the round co-sphere, extended 1-homogeneously to T*Sigma \ 0.
    ContactHamiltonian(Arc<dyn Fn(f64, &BasePoint, &VecN) -> f64 + Send + Sync>),
}

impl Generator {
    pub fn value(&self, t: f64, p: &BasePoint, v: &VecN) -> f64 {
        match self {
            Generator::DualFinsler(fam) => fam.dual_norm(t, p, v).unwrap_or(f64::NAN),
            Generator::ContactHamiltonian(h) => h(t, p, v),
        }
    }

    /// Fibre derivative dH/dv. For the dual-Finsler kind this is the
    /// maximizer of the dual norm, which lies on the F-unit sphere.
    fn grad_v(&self, t: f64, p: &BasePoint, v: &VecN) -> Result<VecN> {
        match self {
            Generator::DualFinsler(fam) => Ok(fam.dual_norm_with_argmax(t, p, v)?.1),
            Generator::ContactHamiltonian(h) => {
                let n = v.dim();
                let step = FD_GRAD_STEP * v.norm();
                let mut g = VecN::zeros(n);
                for i in 0..n {
                    let mut vp = *v;
                    let mut vm = *v;
                    vp[i] += step;
                    vm[i] -= step;
                    g[i] = (h(t, p, &vp) - h(t, p, &vm)) / (2.0 * step);
                }
                Ok(g)
            }
        }
    }

    /// Base derivative dH/dp.
    fn grad_p(&self, base: &BaseManifold, t: f64, p: &BasePoint, v: &VecN) -> Result<VecN> {
        let n = v.dim();
        let step = FD_GRAD_STEP * p.coords().norm_inf().max(1.0);
        let mut g = VecN::zeros(n);
        match self {
            Generator::DualFinsler(fam) if fam.is_custom() => {
                // Envelope form: dF*/dp = -F*(v) dF/dp at the maximizer,
                // avoiding differences across the inner maximization.
                let (fs, w) = fam.dual_norm_with_argmax(t, p, v)?;
                for i in 0..n {
                    let mut e = VecN::zeros(n);
                    e[i] = step;
                    let pp = base.displace(p, &e);
                    let pm = base.displace(p, &e.scale(-1.0));
                    let df =
                        (fam.eval_or_zero(t, &pp, &w) - fam.eval_or_zero(t, &pm, &w)) / (2.0 * step);
                    g[i] = -fs * df;
                }
                Ok(g)
            }
            _ => {
                for i in 0..n {
                    let mut e = VecN::zeros(n);
                    e[i] = step;
                    let pp = base.displace(p, &e);
                    let pm = base.displace(p, &e.scale(-1.0));
                    g[i] = (self.value(t, &pp, v) - self.value(t, &pm, v)) / (2.0 * step);
                }
                Ok(g)
            }
        }
    }
}

/// Phase-space state (p, v) of the cotangent flow at a given time.
#[derive(Clone, Copy, Debug)]
pub struct CotangentState {
    pub t: f64,
    pub p: BasePoint,
    pub v: VecN,
}

/// Dense cotangent trajectory with per-sample Hamiltonian residual
/// H_t(p, v) - H_{t0}(p0, v0).
#[derive(Clone, Debug)]
pub struct CotangentTrajectory {
    pub samples: Vec<CotangentState>,
    pub h_residuals: Vec<f64>,
}

impl CotangentTrajectory {
    /// CSV with columns t, p1..pn, v1..vn, H_residual.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map(|s| s.p.dim()).unwrap_or(0);
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",p{}", i + 1));
        }
        for i in 0..n {
            out.push_str(&format!(",v{}", i + 1));
        }
        out.push_str(",H_residual\n");
        for (s, r) in self.samples.iter().zip(&self.h_residuals) {
            out.push_str(&format!("{}", s.t));
            for i in 0..n {
                out.push_str(&format!(",{}", s.p.coords()[i]));
            }
            for i in 0..n {
                out.push_str(&format!(",{}", s.v[i]));
            }
            out.push_str(&format!(",{r}\n"));
        }
        out
    }
}

fn rk4_step(
    gen: &Generator,
    base: &BaseManifold,
    t: f64,
    p: &BasePoint,
    v: &VecN,
    h: f64,
) -> Result<(BasePoint, VecN)> {
    let field = |t: f64, p: &BasePoint, v: &VecN| -> Result<(VecN, VecN)> {
        Ok((gen.grad_v(t, p, v)?, gen.grad_p(base, t, p, v)?.scale(-1.0)))
    };
    let (k1p, k1v) = field(t, p, v)?;
    let p2 = base.displace(p, &k1p.scale(h / 2.0));
    let (k2p, k2v) = field(t + h / 2.0, &p2, &(*v + k1v.scale(h / 2.0)))?;
    let p3 = base.displace(p, &k2p.scale(h / 2.0));
    let (k3p, k3v) = field(t + h / 2.0, &p3, &(*v + k2v.scale(h / 2.0)))?;
    let p4 = base.displace(p, &k3p.scale(h));
    let (k4p, k4v) = field(t + h, &p4, &(*v + k3v.scale(h)))?;
    let dp = (k1p + k2p.scale(2.0) + k3p.scale(2.0) + k4p).scale(h / 6.0);
    let dv = (k1v + k2v.scale(2.0) + k3v.scale(2.0) + k4v).scale(h / 6.0);
    Ok((base.displace(p, &dp), *v + dv))
}

fn blowup_at(t: f64, p: &BasePoint, v: &VecN) -> Error {
    let mut state: Vec<f64> = p.coords().as_slice().to_vec();
    state.extend_from_slice(v.as_slice());
    Error::BlowUp { t, norm: v.norm(), last: state }
}

fn check_state(t: f64, p: &BasePoint, v: &VecN, last: (&BasePoint, &VecN)) -> Result<()> {
    let n = v.norm();
    if !p.coords().is_finite() || !v.is_finite() || !(BLOWUP_LO..=BLOWUP_HI).contains(&n) {
        let mut state: Vec<f64> = last.0.coords().as_slice().to_vec();
        state.extend_from_slice(last.1.as_slice());
        return Err(Error::BlowUp { t, norm: n, last: state });
    }
    Ok(())
}

/// Integrate the cogeodesic flow dp/dt = dH/dv, dv/dt = -dH/dp with
/// H_t = F*_t from t0 to t1, without representative renormalization.
pub fn integrate_cogeodesic(
    fam: &FinslerFamily,
    base: &BaseManifold,
    ray: &RayPoint,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<CotangentTrajectory> {
    if !(step > 0.0) {
        return Err(Error::Invalid("step must be positive".into()));
    }
    let gen = Generator::DualFinsler(fam.clone());
    let n_steps = ((t1 - t0).abs() / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n_steps as f64;
    let mut p = ray.p;
    let mut v = ray.v;
    let h0 = gen.value(t0, &p, &v);
    let mut samples = vec![CotangentState { t: t0, p, v }];
    let mut res = vec![0.0];
    let mut t = t0;
    for k in 0..n_steps {
        let (pn, vn) = rk4_step(&gen, base, t, &p, &v, h)?;
        t = t0 + (k + 1) as f64 * h;
        check_state(t, &pn, &vn, (&p, &v))?;
        p = pn;
        v = vn;
        samples.push(CotangentState { t, p, v });
        res.push(gen.value(t, &p, &v) - h0);
    }
    Ok(CotangentTrajectory { samples, h_residuals: res })
}

type CacheKey = (u64, [u64; 4], [u64; 4], bool);

fn cache_key(t: f64, ray: &RayPoint, inverse: bool) -> CacheKey {
    let mut pc = [0u64; 4];
    let mut vc = [0u64; 4];
    for i in 0..ray.p.dim() {
        pc[i] = ray.p.coords()[i].to_bits();
        vc[i] = ray.v[i].to_bits();
    }
    (t.to_bits(), pc, vc, inverse)
}

/// Discretized flow of a positive time-dependent contact vector field on
/// ST*Sigma, with scaling-equivariant application.
#[derive(Clone)]
pub struct PositivePath {
    base: BaseManifold,
    generator: Generator,
    cfg: IntegratorConfig,
    reversed: bool,
    cache: Arc<Mutex<HashMap<CacheKey, RayPoint>>>,
}

impl PositivePath {
    pub fn from_family(base: BaseManifold, fam: FinslerFamily, cfg: IntegratorConfig) -> Self {
        PositivePath {
            base,
            generator: Generator::DualFinsler(fam),
            cfg,
            reversed: false,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Path generated by a positive contact Hamiltonian (1-homogeneous in
    /// the covector, relative to the round reference form). Positivity is
    /// spot-checked on a deterministic sample set.
    pub fn from_contact_hamiltonian<F>(
        base: BaseManifold,
        h: F,
        cfg: IntegratorConfig,
    ) -> Result<Self>
    where
        F: Fn(f64, &BasePoint, &VecN) -> f64 + Send + Sync + 'static,
    {
        let gen = Generator::ContactHamiltonian(Arc::new(h));
        let dirs = DirectionSet::canonical(base.dim(), 32);
        for &t in &[-5.0, 0.0, 1.0, 5.0] {
            for u in dirs.dirs() {
                let val = gen.value(t, &base.origin(), u);
                if !(val > 0.0) || !val.is_finite() {
                    return Err(Error::PathNotPositive { value: val });
                }
            }
        }
        Ok(PositivePath {
            base,
            generator: gen,
            cfg,
            reversed: false,
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn base(&self) -> &BaseManifold {
        &self.base
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// The inverse path t -> phi_t^{-1}, negatively transverse.
    pub fn reversed(&self) -> PositivePath {
        PositivePath {
            base: self.base.clone(),
            generator: self.generator.clone(),
            cfg: self.cfg,
            reversed: !self.reversed,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Generator value H_t(p, v); the co-ball gauge of the path.
    pub fn gauge(&self, t: f64, p: &BasePoint, v: &VecN) -> f64 {
        self.generator.value(t, p, v)
    }

    /// Representative rescaled onto the unit co-ball boundary at time t.
    pub fn normalize_unit_dual(&self, t: f64, ray: &RayPoint) -> Result<RayPoint> {
        let g = self.gauge(t, &ray.p, &ray.v);
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::PathNotPositive { value: g });
        }
        Ok(RayPoint {
            p: ray.p,
            v: ray.v.scale(1.0 / g),
            normalization: RayNormalization::UnitDualFinsler(t),
        })
    }

    /// Raw time-dependent flow from time s0 to s1 starting at `ray`,
    /// renormalizing the representative every step. The ray-level result is
    /// independent of the input representative scale.
    pub fn flow_between(&self, ray: &RayPoint, s0: f64, s1: f64) -> Result<RayPoint> {
        let hor = self.cfg.horizon;
        for s in [s0, s1] {
            if s.abs() > hor {
                return Err(Error::HorizonExceeded { t: s, horizon: hor });
            }
        }
        let mut p = ray.p;
        let mut v = ray.v.normalized().ok_or(Error::ZeroVector("flow_between"))?;
        if s0 == s1 {
            return Ok(RayPoint { p, v, normalization: RayNormalization::UnitEuclidean });
        }
        let n_steps = ((s1 - s0).abs() / self.cfg.step).ceil().max(1.0) as usize;
        let h = (s1 - s0) / n_steps as f64;
        let mut s = s0;
        for k in 0..n_steps {
            let (pn, vn) = rk4_step(&self.generator, &self.base, s, &p, &v, h)?;
            s = s0 + (k + 1) as f64 * h;
            check_state(s, &pn, &vn, (&p, &v))?;
            p = pn;
            v = vn.normalized().ok_or_else(|| blowup_at(s, &p, &vn))?;
        }
        Ok(RayPoint { p, v, normalization: RayNormalization::UnitEuclidean })
    }

    /// Dense flow record from time s0 to s1 (per-step samples).
    pub fn flow_record(&self, ray: &RayPoint, s0: f64, s1: f64) -> Result<Vec<CotangentState>> {
        let mut p = ray.p;
        let mut v = ray.v.normalized().ok_or(Error::ZeroVector("flow_record"))?;
        let mut out = vec![CotangentState { t: s0, p, v }];
        if s0 == s1 {
            return Ok(out);
        }
        let n_steps = ((s1 - s0).abs() / self.cfg.step).ceil().max(1.0) as usize;
        let h = (s1 - s0) / n_steps as f64;
        let mut s = s0;
        for k in 0..n_steps {
            let (pn, vn) = rk4_step(&self.generator, &self.base, s, &p, &v, h)?;
            s = s0 + (k + 1) as f64 * h;
            check_state(s, &pn, &vn, (&p, &v))?;
            p = pn;
            v = vn.normalized().ok_or_else(|| blowup_at(s, &p, &vn))?;
            out.push(CotangentState { t: s, p, v });
        }
        Ok(out)
    }

    fn apply_raw(&self, t: f64, ray: &RayPoint) -> Result<RayPoint> {
        self.flow_between(ray, 0.0, t)
    }

    fn apply_inverse_raw(&self, t: f64, ray: &RayPoint) -> Result<RayPoint> {
        // phi_t^{-1}(x): place x at time t and flow back to 0.
        self.flow_between(ray, t, 0.0)
    }

    /// phi_t(ray), projectivized, with memoized results.
    pub fn apply(&self, t: f64, ray: &RayPoint) -> Result<RayPoint> {
        let key = cache_key(t, ray, self.reversed);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let out = if self.reversed {
            self.apply_inverse_raw(t, ray)?
        } else {
            self.apply_raw(t, ray)?
        };
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > 65_536 {
            cache.clear();
        }
        cache.insert(key, out);
        Ok(out)
    }

    /// phi_t^{-1}(ray) by backward integration.
    pub fn apply_inverse(&self, t: f64, ray: &RayPoint) -> Result<RayPoint> {
        let key = cache_key(t, ray, !self.reversed);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let out = if self.reversed {
            self.apply_raw(t, ray)?
        } else {
            self.apply_inverse_raw(t, ray)?
        };
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > 65_536 {
            cache.clear();
        }
        cache.insert(key, out);
        Ok(out)
    }
}

/// Reconstructed cone geodesic t -> (t, pi(phi_t(v))) on a uniform t-grid,
/// with the spatial velocity from the Hamiltonian side and the null
/// residual F_t(w) - 1 (gauge-support residual for callable generators).
#[derive(Clone, Debug)]
pub struct ConeGeodesic {
    pub ts: Vec<f64>,
    pub points: Vec<BasePoint>,
    pub covectors: Vec<VecN>,
    pub velocities: Vec<VecN>,
    pub null_residuals: Vec<f64>,
}

impl ConeGeodesic {
    pub fn event(&self, i: usize) -> SpacetimeEvent {
        SpacetimeEvent { t: self.ts[i], p: self.points[i] }
    }

    /// Linear interpolation of the base point at time t.
    pub fn position_at(&self, base: &BaseManifold, t: f64) -> Option<BasePoint> {
        if self.ts.is_empty() || t < self.ts[0] - 1e-12 || t > *self.ts.last().unwrap() + 1e-12 {
            return None;
        }
        let idx = match self.ts.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Some(self.points[i]),
            Err(i) => i,
        };
        let (i0, i1) = (idx.saturating_sub(1), idx.min(self.ts.len() - 1));
        if i0 == i1 {
            return Some(self.points[i0]);
        }
        let w = (t - self.ts[i0]) / (self.ts[i1] - self.ts[i0]);
        let d = base.delta(&self.points[i0], &self.points[i1]);
        Some(base.displace(&self.points[i0], &d.scale(w)))
    }
}

/// Reconstruct the cone geodesic through `ray` over [t_min, t_max]
/// (t_min <= 0 <= t_max; the ray is the time-0 representative).
pub fn cone_geodesic(
    path: &PositivePath,
    ray: &RayPoint,
    t_min: f64,
    t_max: f64,
) -> Result<ConeGeodesic> {
    if !(t_min <= 0.0 && 0.0 <= t_max) {
        return Err(Error::Invalid("cone_geodesic needs t_min <= 0 <= t_max".into()));
    }
    let backward = path.flow_record(ray, 0.0, t_min)?;
    let forward = path.flow_record(ray, 0.0, t_max)?;
    let mut states: Vec<CotangentState> = backward.into_iter().skip(1).rev().collect();
    states.extend(forward);

    let mut out = ConeGeodesic {
        ts: Vec::with_capacity(states.len()),
        points: Vec::with_capacity(states.len()),
        covectors: Vec::with_capacity(states.len()),
        velocities: Vec::with_capacity(states.len()),
        null_residuals: Vec::with_capacity(states.len()),
    };
    for st in &states {
        let w = path.generator.grad_v(st.t, &st.p, &st.v)?;
        let residual = match &path.generator {
            Generator::DualFinsler(fam) => fam.eval_or_zero(st.t, &st.p, &w) - 1.0,
            Generator::ContactHamiltonian(h) => {
                // Support of the co-ball {H <= 1} at w, against the hull.
                let set = DirectionSet::canonical(w.dim(), 256);
                let objective = |u: &VecN| u.dot(&w) / h(st.t, &st.p, u);
                let (i, coarse) = set.argmax(objective);
                let refined = refine_direction_max(
                    objective,
                    &set.dirs()[i],
                    2.0 * std::f64::consts::PI / 256.0,
                    1e-9,
                )
                .value
                .max(coarse);
                refined - 1.0
            }
        };
        out.ts.push(st.t);
        out.points.push(st.p);
        out.covectors.push(st.v);
        out.velocities.push(w);
        out.null_residuals.push(residual);
    }
    Ok(out)
}

/// Spacetime trajectory of the Lagrangian geodesic integrator, in the
/// affine parameter of the energy functional.
#[derive(Clone, Debug)]
pub struct SpacetimeTrajectory {
    pub params: Vec<f64>,
    pub events: Vec<SpacetimeEvent>,
    pub velocities: Vec<SpacetimeVector>,
    /// L(gamma') along the trajectory; zero for null geodesics.
    pub l_values: Vec<f64>,
}

struct LagrangianState {
    t: f64,
    p: BasePoint,
    u0: f64,
    uw: VecN,
}

/// Acceleration from the Euler-Lagrange system of E_L: solve
/// 2 g(u) du/ds = dL/dx - (d^2 L / du dx) u with g = (1/2) Hess_u L,
/// all derivatives by central finite differences.
fn lagrangian_acceleration(
    cone: &ConeStructure,
    s: f64,
    st: &LagrangianState,
) -> Result<(f64, VecN)> {
    let base = cone.base();
    let n = base.dim();
    let dim = n + 1;
    let l_at = |dt_off: f64, p_off: &VecN, u0: f64, uw: &VecN| -> f64 {
        let p = base.displace(&st.p, p_off);
        cone.lorentz_finsler(st.t + dt_off, &p, &SpacetimeVector::new(u0, *uw))
    };
    let uvec = st.uw.extend(st.u0);
    let hu = 1e-4 * uvec.norm().max(1.0);
    let hx = 1e-4 * st.p.coords().norm_inf().max(st.t.abs()).max(1.0);
    let zero = VecN::zeros(n);

    let l_of = |u: &VecN| l_at(0.0, &zero, u[0], &u.tail());
    // g = (1/2) Hess_u L.
    let mut g = MatN::zeros(dim);
    let l0 = l_of(&uvec);
    for i in 0..dim {
        for j in i..dim {
            let val = if i == j {
                let mut up = uvec;
                let mut um = uvec;
                up[i] += hu;
                um[i] -= hu;
                (l_of(&up) - 2.0 * l0 + l_of(&um)) / (hu * hu)
            } else {
                let mut upp = uvec;
                let mut upm = uvec;
                let mut ump = uvec;
                let mut umm = uvec;
                upp[i] += hu;
                upp[j] += hu;
                upm[i] += hu;
                upm[j] -= hu;
                ump[i] -= hu;
                ump[j] += hu;
                umm[i] -= hu;
                umm[j] -= hu;
                (l_of(&upp) - l_of(&upm) - l_of(&ump) + l_of(&umm)) / (4.0 * hu * hu)
            };
            g.set(i, j, 0.5 * val);
            g.set(j, i, 0.5 * val);
        }
    }

    // b_k = dL/dx_k - sum_m (d^2 L / du_k dx_m) u_m.
    let l_x = |k: usize, sign: f64, u: &VecN| -> f64 {
        if k == 0 {
            l_at(sign * hx, &zero, u[0], &u.tail())
        } else {
            let mut off = VecN::zeros(n);
            off[k - 1] = sign * hx;
            l_at(0.0, &off, u[0], &u.tail())
        }
    };
    let mut b = VecN::zeros(dim);
    for k in 0..dim {
        let dl_dx = (l_x(k, 1.0, &uvec) - l_x(k, -1.0, &uvec)) / (2.0 * hx);
        b[k] = dl_dx;
    }
    for k in 0..dim {
        let mut mixed_sum = 0.0;
        for m in 0..dim {
            let mut up = uvec;
            let mut um = uvec;
            up[k] += hu;
            um[k] -= hu;
            let mixed = (l_x(m, 1.0, &up) - l_x(m, -1.0, &up) - l_x(m, 1.0, &um)
                + l_x(m, -1.0, &um))
                / (4.0 * hu * hx);
            mixed_sum += mixed * uvec[m];
        }
        b[k] -= mixed_sum;
    }

    let acc = g
        .scale(2.0)
        .solve(&b)
        .ok_or(Error::DegenerateTensor(s))?;
    Ok((acc[0], acc.tail()))
}

/// Integrate the null geodesic of L = dt^2 - F_t^2 from `event` with
/// initial spatial velocity `w` (the dt-component is fixed by the null
/// condition w0 = F_t(w)), until the Cauchy time reaches `t_end`.
pub fn lagrangian_geodesic(
    cone: &ConeStructure,
    event: &SpacetimeEvent,
    w: &VecN,
    t_end: f64,
    step: f64,
) -> Result<SpacetimeTrajectory> {
    if w.is_zero() {
        return Err(Error::ZeroVector("lagrangian_geodesic"));
    }
    if !(step > 0.0) {
        return Err(Error::Invalid("step must be positive".into()));
    }
    let base = cone.base().clone();
    let w0 = cone.family().eval(event.t, &event.p, w)?;
    let forward = t_end >= event.t;
    let ds = if forward { step } else { -step };
    let mut st = LagrangianState { t: event.t, p: event.p, u0: w0, uw: *w };
    let mut s = 0.0;

    let mut out = SpacetimeTrajectory {
        params: vec![0.0],
        events: vec![*event],
        velocities: vec![SpacetimeVector::new(w0, *w)],
        l_values: vec![cone.lorentz_finsler(event.t, &event.p, &SpacetimeVector::new(w0, *w))],
    };

    let rk4 = |st: &LagrangianState, s: f64, h: f64| -> Result<LagrangianState> {
        // Second-order system as first order in (x, u).
        let f = |st: &LagrangianState, s: f64| -> Result<(f64, VecN, f64, VecN)> {
            let (a0, aw) = lagrangian_acceleration(cone, s, st)?;
            Ok((st.u0, st.uw, a0, aw))
        };
        let (k1t, k1p, k1u0, k1uw) = f(st, s)?;
        let mid1 = LagrangianState {
            t: st.t + 0.5 * h * k1t,
            p: base.displace(&st.p, &k1p.scale(0.5 * h)),
            u0: st.u0 + 0.5 * h * k1u0,
            uw: st.uw + k1uw.scale(0.5 * h),
        };
        let (k2t, k2p, k2u0, k2uw) = f(&mid1, s + 0.5 * h)?;
        let mid2 = LagrangianState {
            t: st.t + 0.5 * h * k2t,
            p: base.displace(&st.p, &k2p.scale(0.5 * h)),
            u0: st.u0 + 0.5 * h * k2u0,
            uw: st.uw + k2uw.scale(0.5 * h),
        };
        let (k3t, k3p, k3u0, k3uw) = f(&mid2, s + 0.5 * h)?;
        let end = LagrangianState {
            t: st.t + h * k3t,
            p: base.displace(&st.p, &k3p.scale(h)),
            u0: st.u0 + h * k3u0,
            uw: st.uw + k3uw.scale(h),
        };
        let (k4t, k4p, k4u0, k4uw) = f(&end, s + h)?;
        Ok(LagrangianState {
            t: st.t + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
            p: base.displace(
                &st.p,
                &(k1p + k2p.scale(2.0) + k3p.scale(2.0) + k4p).scale(h / 6.0),
            ),
            u0: st.u0 + h / 6.0 * (k1u0 + 2.0 * k2u0 + 2.0 * k3u0 + k4u0),
            uw: st.uw + (k1uw + k2uw.scale(2.0) + k3uw.scale(2.0) + k4uw).scale(h / 6.0),
        })
    };

    let max_steps = 10_000_000usize;
    for _ in 0..max_steps {
        let reached = if forward { st.t >= t_end } else { st.t <= t_end };
        if reached {
            break;
        }
        // Shorten the final step to land on t_end.
        let remaining = (t_end - st.t) / st.u0;
        let h = if remaining.abs() < ds.abs() { remaining } else { ds };
        let next = rk4(&st, s, h)?;
        if !next.p.coords().is_finite() || !next.uw.is_finite() || !next.t.is_finite() {
            let mut state: Vec<f64> = st.p.coords().as_slice().to_vec();
            state.extend_from_slice(st.uw.as_slice());
            return Err(Error::BlowUp { t: next.t, norm: next.uw.norm(), last: state });
        }
        st = next;
        s += h;
        out.params.push(s);
        out.events.push(SpacetimeEvent { t: st.t, p: st.p });
        out.velocities.push(SpacetimeVector::new(st.u0, st.uw));
        out.l_values.push(cone.lorentz_finsler(st.t, &st.p, &SpacetimeVector::new(st.u0, st.uw)));
        if out.params.len() > max_steps {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsler::MatrixField;

    fn minkowski_path() -> PositivePath {
        let base = BaseManifold::euclidean(2).unwrap();
        PositivePath::from_family(
            base,
            FinslerFamily::euclidean(2),
            IntegratorConfig::default(),
        )
    }

    #[test]
    fn straight_cogeodesics_in_flat_space() {
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::euclidean(2);
        let ray = RayPoint::unit_euclidean(
            base.origin(),
            VecN::from_slice(&[1.0, 0.0]),
        )
        .unwrap();
        let traj = integrate_cogeodesic(&fam, &base, &ray, 0.0, 1.0, 1e-2).unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.p.coords()[0] - 1.0).abs() < 1e-12);
        assert!(last.p.coords()[1].abs() < 1e-12);
        assert!((last.v[0] - 1.0).abs() < 1e-12);
        assert!(traj.h_residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn riemannian_cogeodesic_velocity() {
        // H = sqrt(v^T A^{-1} v), A = diag(4,1): dH/dv at v=(1,0) is (1/2, 0).
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::riemannian(
            &base,
            MatrixField::constant(MatN::diagonal(&[4.0, 1.0])),
        )
        .unwrap();
        let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0, 0.0])).unwrap();
        let traj = integrate_cogeodesic(&fam, &base, &ray, 0.0, 1.0, 1e-3).unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.p.coords()[0] - 0.5).abs() < 1e-10, "{:?}", last.p);
        assert!(last.p.coords()[1].abs() < 1e-12);
    }

    #[test]
    fn time_scaled_family_matches_closed_form() {
        // F_t = (1+t)|w| has H = |v|/(1+t); p(t) = p0 + v_hat ln(1+t).
        // Only valid for t > -1, so skip the global admissibility sampling.
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::custom_unchecked(2, |t, _, w: &VecN| (1.0 + t) * w.norm());
        let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0, 0.0])).unwrap();
        let traj = integrate_cogeodesic(&fam, &base, &ray, 0.0, 1.0, 1e-3).unwrap();
        let last = traj.samples.last().unwrap();
        assert!(
            (last.p.coords()[0] - 2.0_f64.ln()).abs() < 1e-8,
            "got {}, want ln 2",
            last.p.coords()[0]
        );
    }

    #[test]
    fn trajectory_csv_schema() {
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::euclidean(2);
        let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0, 0.0])).unwrap();
        let traj = integrate_cogeodesic(&fam, &base, &ray, 0.0, 0.1, 1e-2).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,p1,p2,v1,v2,H_residual");
        assert_eq!(csv.lines().count(), traj.samples.len() + 1);
    }

    #[test]
    fn path_apply_identity_and_translation() {
        let path = minkowski_path();
        let base = path.base().clone();
        let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0, 0.0])).unwrap();
        let id = path.apply(0.0, &ray).unwrap();
        assert!(ray.ray_distance(&id, &base) < 1e-14);
        let moved = path.apply(1.0, &ray).unwrap();
        assert!((moved.p.coords()[0] - 1.0).abs() < 1e-12);
        assert!(moved.v.angle_to(&ray.v) < 1e-12);
        let back = path.apply_inverse(1.0, &moved).unwrap();
        assert!(ray.ray_distance(&back, &base) < 1e-10);
    }

    #[test]
    fn flow_between_composes() {
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::custom(&base, |t, _, w: &VecN| (1.0 + 0.3 * t.sin()) * w.norm())
            .unwrap();
        let path = PositivePath::from_family(base.clone(), fam, IntegratorConfig::default());
        let ray = RayPoint::unit_euclidean(
            base.point(&[0.2, -0.1]).unwrap(),
            VecN::from_slice(&[0.6, 0.8]),
        )
        .unwrap();
        let direct = path.apply(1.0, &ray).unwrap();
        let half = path.flow_between(&ray, 0.0, 0.5).unwrap();
        let staged = path.flow_between(&half, 0.5, 1.0).unwrap();
        assert!(direct.ray_distance(&staged, &base) < 1e-9);
    }

    #[test]
    fn scaling_equivariance_of_the_lifted_flow() {
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::custom(&base, |t, p: &BasePoint, w: &VecN| {
            (1.0 + 0.2 * (t + p.coords()[0]).sin()) * w.norm()
        })
        .unwrap();
        let path = PositivePath::from_family(base.clone(), fam, IntegratorConfig::default());
        let v = VecN::from_slice(&[0.3, -0.7]);
        for &lam in &[0.1, 10.0] {
            let r1 = RayPoint::unit_euclidean(base.origin(), v).unwrap();
            let r2 = RayPoint { p: base.origin(), v: v.scale(lam), normalization: RayNormalization::UnitEuclidean };
            let a = path.apply(0.7, &r1).unwrap();
            let b = path.apply(0.7, &r2).unwrap();
            assert!(a.ray_distance(&b, &base) <= 1e-8, "lambda {lam}");
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let path = minkowski_path();
        let ray = RayPoint::unit_euclidean(path.base().origin(), VecN::from_slice(&[1.0, 0.0]))
            .unwrap();
        assert!(matches!(
            path.apply(11.0, &ray),
            Err(Error::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn minkowski_cone_geodesic_is_straight() {
        let path = minkowski_path();
        let base = path.base().clone();
        let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0, 0.0])).unwrap();
        let geo = cone_geodesic(&path, &ray, 0.0, 1.0).unwrap();
        for (i, t) in geo.ts.iter().enumerate() {
            assert!((geo.points[i].coords()[0] - t).abs() < 1e-10);
            assert!(geo.null_residuals[i].abs() < 1e-10);
        }
    }

    #[test]
    fn lagrangian_straight_line_minkowski() {
        let base = BaseManifold::euclidean(2).unwrap();
        let cone = ConeStructure::new(base.clone(), FinslerFamily::euclidean(2)).unwrap();
        let ev = SpacetimeEvent { t: 0.0, p: base.origin() };
        let traj =
            lagrangian_geodesic(&cone, &ev, &VecN::from_slice(&[1.0, 0.0]), 1.0, 1e-2).unwrap();
        let last = traj.events.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-9);
        assert!((last.p.coords()[0] - 1.0).abs() < 1e-6);
        assert!(traj.l_values.iter().all(|l| l.abs() < 1e-8));
    }

    #[test]
    fn lagrangian_riemannian_null_speed() {
        // diag(4,1): x-axis null ray moves at dx/dt = 1/2.
        let base = BaseManifold::euclidean(2).unwrap();
        let fam = FinslerFamily::riemannian(
            &base,
            MatrixField::constant(MatN::diagonal(&[4.0, 1.0])),
        )
        .unwrap();
        let cone = ConeStructure::new(base.clone(), fam).unwrap();
        let ev = SpacetimeEvent { t: 0.0, p: base.origin() };
        let traj =
            lagrangian_geodesic(&cone, &ev, &VecN::from_slice(&[1.0, 0.0]), 1.0, 1e-2).unwrap();
        let last = traj.events.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-9);
        assert!((last.p.coords()[0] - 0.5).abs() < 1e-6, "{:?}", last.p);
    }

    #[test]
    fn blowup_reported_with_time() {
        // Gauge shrinking super-exponentially in p drives |v| up; the
        // detector must fire rather than return garbage.
        let base = BaseManifold::euclidean(1).unwrap();
        let fam = FinslerFamily::custom(&base, |_, p: &BasePoint, w: &VecN| {
            (1.0 + (3.0 * p.coords()[0]).exp()) * w.norm()
        });
        // Admissibility sampling already fails for huge values; build the
        // path directly from the contact Hamiltonian instead.
        let _ = fam;
        let path = PositivePath::from_contact_hamiltonian(
            base.clone(),
            |_, p: &BasePoint, v: &VecN| v.norm() * (1.0 + (8.0 * p.coords()[0].abs()).exp()),
            IntegratorConfig { step: 0.05, horizon: 1e6, margin_delta: 1e-3 },
        )
        .unwrap();
        let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0])).unwrap();
        let res = path.apply(1e5, &ray);
        assert!(matches!(res, Err(Error::BlowUp { .. }) | Err(Error::HorizonExceeded { .. })));
    }
}
