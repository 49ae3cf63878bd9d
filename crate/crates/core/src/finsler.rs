//! Time-dependent Finsler metric families F_t on the base manifold.
//!
//! A family assigns to each (t, p) a positive 1-homogeneous norm-like
//! function on the tangent fibre with positive definite fundamental tensor.
//! Supported kinds: Euclidean, Riemannian (SPD matrix field A), Randers
//! (|w|_A + b(w) with |b|_{A^{-1}} < 1) and a black-box callable. The
//! closed-form kinds carry exact fundamental tensors, Legendre transforms
//! and dual norms; the callable kind falls back to central finite
//! differences and sampled maximization with golden-section / ring
//! refinement.

use std::sync::Arc;

use crate::base::{BaseManifold, BasePoint, SpacetimeCurve, Topology};
use crate::directions::{refine_direction_max, DirectionSet};
use crate::error::{Error, Result};
use crate::vecn::{MatN, VecN};

/// Relative step for second-order finite differences.
const FD_HESSIAN_STEP: f64 = 1e-4;
/// Angular tolerance for dual-norm refinement on the callable kind.
const DUAL_REFINE_TOL: f64 = 1e-10;

/// SPD matrix field A(t, p).
#[derive(Clone)]
pub struct MatrixField {
    f: Arc<dyn Fn(f64, &BasePoint) -> MatN + Send + Sync>,
}

impl MatrixField {
    pub fn constant(m: MatN) -> Self {
        MatrixField { f: Arc::new(move |_, _| m) }
    }

    pub fn from_fn<F: Fn(f64, &BasePoint) -> MatN + Send + Sync + 'static>(f: F) -> Self {
        MatrixField { f: Arc::new(f) }
    }

    pub fn eval(&self, t: f64, p: &BasePoint) -> MatN {
        (self.f)(t, p)
    }
}

/// One-form field b(t, p), stored as covector components.
#[derive(Clone)]
pub struct CovectorField {
    f: Arc<dyn Fn(f64, &BasePoint) -> VecN + Send + Sync>,
}

impl CovectorField {
    pub fn constant(v: VecN) -> Self {
        CovectorField { f: Arc::new(move |_, _| v) }
    }

    pub fn from_fn<F: Fn(f64, &BasePoint) -> VecN + Send + Sync + 'static>(f: F) -> Self {
        CovectorField { f: Arc::new(f) }
    }

    pub fn eval(&self, t: f64, p: &BasePoint) -> VecN {
        (self.f)(t, p)
    }
}

type ScalarFn = Arc<dyn Fn(f64, &BasePoint, &VecN) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Euclidean,
    Riemannian(MatrixField),
    Randers(MatrixField, CovectorField),
    Custom(ScalarFn),
}

/// Time-dependent Finsler metric family on a fixed base manifold.
#[derive(Clone)]
pub struct FinslerFamily {
    dim: usize,
    kind: Kind,
}

/// Fundamental tensor g_w = (1/2) Hess_w F^2 together with its
/// positive-definiteness verdict at the sampled ray.
#[derive(Clone, Copy, Debug)]
pub struct FundamentalTensor {
    pub matrix: MatN,
    pub positive_definite: bool,
}

impl FinslerFamily {
    pub fn euclidean(dim: usize) -> Self {
        FinslerFamily { dim, kind: Kind::Euclidean }
    }

    pub fn riemannian(base: &BaseManifold, a: MatrixField) -> Result<Self> {
        let fam = FinslerFamily { dim: base.dim(), kind: Kind::Riemannian(a) };
        fam.validate(base)?;
        Ok(fam)
    }

    pub fn randers(base: &BaseManifold, a: MatrixField, b: CovectorField) -> Result<Self> {
        let fam = FinslerFamily { dim: base.dim(), kind: Kind::Randers(a, b) };
        fam.validate(base)?;
        Ok(fam)
    }

    pub fn custom<F: Fn(f64, &BasePoint, &VecN) -> f64 + Send + Sync + 'static>(
        base: &BaseManifold,
        f: F,
    ) -> Result<Self> {
        let fam = FinslerFamily { dim: base.dim(), kind: Kind::Custom(Arc::new(f)) };
        fam.validate(base)?;
        Ok(fam)
    }

    /// Callable-kind family without admissibility sampling; used internally
    /// where the gauge is convex by construction.
    pub(crate) fn custom_unchecked<F: Fn(f64, &BasePoint, &VecN) -> f64 + Send + Sync + 'static>(
        dim: usize,
        f: F,
    ) -> Self {
        FinslerFamily { dim, kind: Kind::Custom(Arc::new(f)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.kind, Kind::Custom(_))
    }

    /// F scaled by a constant factor c > 0 (cone dilation by 1/c).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Invalid(format!("scale factor {c} must be positive")));
        }
        let kind = match &self.kind {
            Kind::Euclidean => {
                Kind::Riemannian(MatrixField::constant(MatN::identity(self.dim).scale(c * c)))
            }
            Kind::Riemannian(a) => {
                let a = a.clone();
                Kind::Riemannian(MatrixField::from_fn(move |t, p| a.eval(t, p).scale(c * c)))
            }
            Kind::Randers(a, b) => {
                let (a, b) = (a.clone(), b.clone());
                Kind::Randers(
                    MatrixField::from_fn(move |t, p| a.eval(t, p).scale(c * c)),
                    CovectorField::from_fn(move |t, p| b.eval(t, p).scale(c)),
                )
            }
            Kind::Custom(f) => {
                let f = f.clone();
                Kind::Custom(Arc::new(move |t, p: &BasePoint, w: &VecN| c * f(t, p, w)))
            }
        };
        Ok(FinslerFamily { dim: self.dim, kind })
    }

    /// F_t(p, w). Errors on the zero vector.
    pub fn eval(&self, t: f64, p: &BasePoint, w: &VecN) -> Result<f64> {
        if w.is_zero() {
            return Err(Error::ZeroVector("eval_F"));
        }
        Ok(self.eval_raw(t, p, w))
    }

    fn eval_raw(&self, t: f64, p: &BasePoint, w: &VecN) -> f64 {
        match &self.kind {
            Kind::Euclidean => w.norm(),
            Kind::Riemannian(a) => a.eval(t, p).quadratic(w).max(0.0).sqrt(),
            Kind::Randers(a, b) => {
                a.eval(t, p).quadratic(w).max(0.0).sqrt() + b.eval(t, p).dot(w)
            }
            Kind::Custom(f) => f(t, p, w),
        }
    }

    /// F extended by 0 at w = 0; the 1-homogeneous extension.
    pub fn eval_or_zero(&self, t: f64, p: &BasePoint, w: &VecN) -> f64 {
        if w.is_zero() {
            0.0
        } else {
            self.eval_raw(t, p, w)
        }
    }

    /// Fibre gradient of F at w != 0.
    pub fn gradient(&self, t: f64, p: &BasePoint, w: &VecN) -> Result<VecN> {
        if w.is_zero() {
            return Err(Error::ZeroVector("gradient"));
        }
        Ok(match &self.kind {
            Kind::Euclidean => w.normalized().unwrap(),
            Kind::Riemannian(a) => {
                let aw = a.eval(t, p).matvec(w);
                let alpha = aw.dot(w).max(0.0).sqrt();
                aw.scale(1.0 / alpha)
            }
            Kind::Randers(a, b) => {
                let aw = a.eval(t, p).matvec(w);
                let alpha = aw.dot(w).max(0.0).sqrt();
                aw.scale(1.0 / alpha) + b.eval(t, p)
            }
            Kind::Custom(f) => {
                let h = FD_HESSIAN_STEP * w.norm().max(1.0);
                let mut g = VecN::zeros(self.dim);
                for i in 0..self.dim {
                    let mut wp = *w;
                    let mut wm = *w;
                    wp[i] += h;
                    wm[i] -= h;
                    g[i] = (f(t, p, &wp) - f(t, p, &wm)) / (2.0 * h);
                }
                g
            }
        })
    }

    /// Fundamental tensor g_w = (1/2) Hess_w F^2.
    ///
    /// Closed forms for the exact kinds, central finite differences with
    /// relative step 1e-4 for the callable kind. A non-positive-definite
    /// result is reported through the flag, not as an error: it marks a ray
    /// where the metric is not strongly convex.
    pub fn fundamental_tensor(&self, t: f64, p: &BasePoint, w: &VecN) -> Result<FundamentalTensor> {
        if w.is_zero() {
            return Err(Error::ZeroVector("fundamental_tensor"));
        }
        let matrix = match &self.kind {
            Kind::Euclidean => MatN::identity(self.dim),
            Kind::Riemannian(a) => a.eval(t, p),
            Kind::Randers(a, b) => {
                // g = l l^T + (F/alpha)(A - (Aw)(Aw)^T / alpha^2), l = Aw/alpha + b.
                let am = a.eval(t, p);
                let bv = b.eval(t, p);
                let aw = am.matvec(w);
                let alpha = aw.dot(w).max(0.0).sqrt();
                let f = alpha + bv.dot(w);
                let l = aw.scale(1.0 / alpha) + bv;
                let proj = am.sub(&MatN::outer(&aw, &aw).scale(1.0 / (alpha * alpha)));
                MatN::outer(&l, &l).add(&proj.scale(f / alpha))
            }
            Kind::Custom(f) => {
                let h = FD_HESSIAN_STEP * w.norm().max(1.0);
                let half_sq = |w: &VecN| {
                    let v = f(t, p, w);
                    0.5 * v * v
                };
                let mut g = MatN::zeros(self.dim);
                let f0 = half_sq(w);
                for i in 0..self.dim {
                    for j in i..self.dim {
                        let val = if i == j {
                            let mut wp = *w;
                            let mut wm = *w;
                            wp[i] += h;
                            wm[i] -= h;
                            (half_sq(&wp) - 2.0 * f0 + half_sq(&wm)) / (h * h)
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
                            (half_sq(&wpp) - half_sq(&wpm) - half_sq(&wmp) + half_sq(&wmm))
                                / (4.0 * h * h)
                        };
                        g.set(i, j, val);
                        g.set(j, i, val);
                    }
                }
                g
            }
        };
        Ok(FundamentalTensor { positive_definite: matrix.is_positive_definite(), matrix })
    }

    /// Legendre transform w -> g_w(w, .) = F grad F, as covector components.
    pub fn legendre(&self, t: f64, p: &BasePoint, w: &VecN) -> Result<VecN> {
        if w.is_zero() {
            return Err(Error::ZeroVector("legendre"));
        }
        let f = self.eval_raw(t, p, w);
        Ok(self.gradient(t, p, w)?.scale(f))
    }

    /// Dual norm F*_t(p, v) = max { v(w) : F_t(p, w) <= 1 }.
    pub fn dual_norm(&self, t: f64, p: &BasePoint, v: &VecN) -> Result<f64> {
        Ok(self.dual_norm_with_argmax(t, p, v)?.0)
    }

    /// Dual norm together with its maximizer on the F-unit sphere.
    ///
    /// The maximizer is the fibre derivative of F* (Danskin), which the
    /// dynamics module uses as the exact Hamiltonian velocity.
    pub fn dual_norm_with_argmax(&self, t: f64, p: &BasePoint, v: &VecN) -> Result<(f64, VecN)> {
        if v.is_zero() {
            return Err(Error::ZeroVector("dual_norm"));
        }
        match &self.kind {
            Kind::Euclidean => {
                let w = v.normalized().unwrap();
                Ok((v.norm(), w))
            }
            Kind::Riemannian(a) => {
                let inv = a
                    .eval(t, p)
                    .inverse()
                    .ok_or_else(|| Error::NotAdmissible("singular metric matrix".into()))?;
                let iv = inv.matvec(v);
                let dual = iv.dot(v).max(0.0).sqrt();
                Ok((dual, iv.scale(1.0 / dual)))
            }
            Kind::Randers(a, b) => {
                // The unit ball {|w|_A + b(w) <= 1} is the ellipsoid
                // (w - c)^T Q (w - c) <= r^2 with Q = A - b b^T,
                // c = -Q^{-1} b, r^2 = 1 + b^T Q^{-1} b.
                let am = a.eval(t, p);
                let bv = b.eval(t, p);
                let q = am.sub(&MatN::outer(&bv, &bv));
                let qinv = q
                    .inverse()
                    .ok_or_else(|| Error::NotAdmissible("randers data not admissible".into()))?;
                let c = qinv.matvec(&bv).scale(-1.0);
                let r = (1.0 + qinv.quadratic(&bv)).sqrt();
                let qiv = qinv.matvec(v);
                let s = qiv.dot(v).max(0.0).sqrt();
                let dual = c.dot(v) + r * s;
                let w = c + qiv.scale(r / s);
                Ok((dual, w))
            }
            Kind::Custom(f) => {
                let count = DirectionSet::default_count(self.dim);
                let set = DirectionSet::canonical(self.dim, count);
                let objective = |u: &VecN| v.dot(u) / f(t, p, u);
                let (i, _) = set.argmax(objective);
                let width = match self.dim {
                    1 => 0.0,
                    2 => 2.0 * std::f64::consts::PI / count as f64,
                    _ => 4.0 / (count as f64).sqrt(),
                };
                let out = refine_direction_max(objective, &set.dirs()[i], width, DUAL_REFINE_TOL);
                if !out.converged {
                    return Err(Error::Refinement { residual: width });
                }
                let w = out.dir.scale(1.0 / f(t, p, &out.dir));
                Ok((out.value, w))
            }
        }
    }

    /// Spot-check positivity, homogeneity, admissibility and strong
    /// convexity on a deterministic sample grid.
    fn validate(&self, base: &BaseManifold) -> Result<()> {
        let times = [-10.0, -2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 10.0];
        let points = sample_points(base);
        let rays = DirectionSet::canonical(self.dim, if self.dim == 2 { 16 } else { 32 });
        for &t in &times {
            for p in &points {
                match &self.kind {
                    Kind::Riemannian(a) => {
                        if !a.eval(t, p).is_positive_definite() {
                            return Err(Error::NotAdmissible(format!(
                                "matrix field not positive definite at t={t}"
                            )));
                        }
                    }
                    Kind::Randers(a, b) => {
                        let am = a.eval(t, p);
                        if !am.is_positive_definite() {
                            return Err(Error::NotAdmissible(format!(
                                "randers matrix field not positive definite at t={t}"
                            )));
                        }
                        let inv = am.inverse().ok_or_else(|| {
                            Error::NotAdmissible("singular randers matrix".into())
                        })?;
                        let bn = inv.quadratic(&b.eval(t, p)).max(0.0).sqrt();
                        if bn >= 1.0 {
                            return Err(Error::NotAdmissible(format!(
                                "randers admissibility violated: |b|_A = {bn:.6} >= 1 at t={t}"
                            )));
                        }
                    }
                    Kind::Custom(f) => {
                        for u in rays.dirs() {
                            let val = f(t, p, u);
                            if !(val > 0.0) || !val.is_finite() {
                                return Err(Error::NotAdmissible(format!(
                                    "custom F not positive at t={t}: F = {val}"
                                )));
                            }
                            let scaled = f(t, p, &u.scale(3.0));
                            if (scaled - 3.0 * val).abs() > 1e-6 * val.abs().max(1.0) {
                                return Err(Error::NotAdmissible(
                                    "custom F not 1-homogeneous".into(),
                                ));
                            }
                        }
                    }
                    Kind::Euclidean => {}
                }
            }
        }
        // Strong convexity probe at a handful of rays.
        if !matches!(self.kind, Kind::Euclidean) {
            let p0 = base.origin();
            for &t in &[0.0, 1.0] {
                for u in rays.dirs().iter().step_by(rays.len().div_ceil(8).max(1)) {
                    let g = self.fundamental_tensor(t, &p0, u)?;
                    if !g.positive_definite {
                        return Err(Error::NotAdmissible(format!(
                            "fundamental tensor not positive definite at t={t}, ray {u:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn sample_points(base: &BaseManifold) -> Vec<BasePoint> {
    let n = base.dim();
    let axis: Vec<f64> = match base.topology() {
        Topology::Euclidean => vec![-1.0, 0.0, 1.0],
        Topology::Torus(periods) => {
            let l = periods[0];
            (0..4).map(|i| i as f64 * l / 4.0).collect()
        }
    };
    let mut pts = Vec::new();
    let m = axis.len();
    for idx in 0..m.pow(n as u32) {
        let mut c = vec![0.0; n];
        let mut k = idx;
        for x in c.iter_mut() {
            *x = axis[k % m];
            k /= m;
        }
        pts.push(base.point(&c).unwrap());
    }
    pts
}

/// Energy (1/2) integral of L(gamma') with L = w0^2 - F_t(w)^2, by the
/// composite trapezoid rule over the samples. Velocities are taken by
/// central differences at interior samples and one-sided at the ends.
pub fn energy(fam: &FinslerFamily, base: &BaseManifold, curve: &SpacetimeCurve) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::BadCurve);
    }
    for k in 1..curve.len() {
        if !(curve[k].0 > curve[k - 1].0) {
            return Err(Error::BadCurve);
        }
    }
    let m = curve.len();
    let mut lagrangian = Vec::with_capacity(m);
    for k in 0..m {
        let (lo, hi) = if k == 0 {
            (0, 1)
        } else if k == m - 1 {
            (m - 2, m - 1)
        } else {
            (k - 1, k + 1)
        };
        let ds = curve[hi].0 - curve[lo].0;
        let w0 = (curve[hi].1.t - curve[lo].1.t) / ds;
        let w = base.delta(&curve[lo].1.p, &curve[hi].1.p).scale(1.0 / ds);
        let (s, ev) = curve[k];
        let _ = (s, ev);
        let f = fam.eval_or_zero(curve[k].1.t, &curve[k].1.p, &w);
        lagrangian.push(w0 * w0 - f * f);
    }
    let mut total = 0.0;
    for k in 1..m {
        let ds = curve[k].0 - curve[k - 1].0;
        total += 0.5 * ds * (lagrangian[k] + lagrangian[k - 1]);
    }
    Ok(0.5 * total)
}
