//! Cone structures on R x Sigma and locally Lipschitz Lorentz-Finsler spaces.
//!
//! A splitting-type cone structure is the field C(t, p) = { w0 >= F_t(p, w) }
//! induced by a Finsler family, with Lorentz-Finsler function
//! L = w0^2 - F_t^2. The weaker [`LorentzFinslerSpace`] carries only a
//! positively 1-homogeneous concave G >= 0 on the cone, realized here as
//! G = w0 - h_K(w) for a fibre-wise co-ball field K_t(p); that covers every
//! cone produced by a positive path, convex or not.

use std::sync::Arc;

use serde::Serialize;

use crate::base::{BaseManifold, BasePoint, SpacetimeVector, Topology};
use crate::convex::{self, StarBody};
use crate::error::{Error, Result};
use crate::finsler::FinslerFamily;
use crate::rng::SplitMix64;
use crate::vecn::VecN;

/// Absolute null-classification tolerance, scaled by the vector norm.
const NULL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CausalClass {
    FutureTimelike,
    FutureNull,
    PastTimelike,
    PastNull,
    NonCausal,
}

impl CausalClass {
    pub fn is_future_causal(&self) -> bool {
        matches!(self, CausalClass::FutureTimelike | CausalClass::FutureNull)
    }

    pub fn is_past_causal(&self) -> bool {
        matches!(self, CausalClass::PastTimelike | CausalClass::PastNull)
    }

    /// The class of the negated vector.
    pub fn reversed(&self) -> CausalClass {
        match self {
            CausalClass::FutureTimelike => CausalClass::PastTimelike,
            CausalClass::FutureNull => CausalClass::PastNull,
            CausalClass::PastTimelike => CausalClass::FutureTimelike,
            CausalClass::PastNull => CausalClass::FutureNull,
            CausalClass::NonCausal => CausalClass::NonCausal,
        }
    }
}

/// Cone structure of splitting type, C = { w0 >= F_t(p, w) }.
#[derive(Clone)]
pub struct ConeStructure {
    base: BaseManifold,
    family: FinslerFamily,
}

impl ConeStructure {
    pub fn new(base: BaseManifold, family: FinslerFamily) -> Result<Self> {
        if base.dim() != family.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: family.dim() });
        }
        Ok(ConeStructure { base, family })
    }

    pub fn base(&self) -> &BaseManifold {
        &self.base
    }

    pub fn family(&self) -> &FinslerFamily {
        &self.family
    }

    /// L(t, p, (w0, w)) = w0^2 - F_t(p, w)^2.
    pub fn lorentz_finsler(&self, t: f64, p: &BasePoint, sv: &SpacetimeVector) -> f64 {
        let f = self.family.eval_or_zero(t, p, &sv.spatial);
        sv.dt * sv.dt - f * f
    }

    /// Causal classification with null tolerance 1e-9 scaled by |sv|.
    pub fn classify(&self, t: f64, p: &BasePoint, sv: &SpacetimeVector) -> Result<CausalClass> {
        if sv.is_zero() {
            return Err(Error::ZeroVector("classify"));
        }
        let tol = NULL_TOL * sv.norm();
        if sv.spatial.is_zero() {
            return Ok(if sv.dt > 0.0 {
                CausalClass::FutureTimelike
            } else {
                CausalClass::PastTimelike
            });
        }
        let f = self.family.eval_or_zero(t, p, &sv.spatial);
        let fr = self.family.eval_or_zero(t, p, &sv.spatial.scale(-1.0));
        if (sv.dt - f).abs() <= tol && sv.dt > 0.0 {
            return Ok(CausalClass::FutureNull);
        }
        if (-sv.dt - fr).abs() <= tol && sv.dt < 0.0 {
            return Ok(CausalClass::PastNull);
        }
        if sv.dt > f {
            return Ok(CausalClass::FutureTimelike);
        }
        if -sv.dt > fr {
            return Ok(CausalClass::PastTimelike);
        }
        Ok(CausalClass::NonCausal)
    }

    /// The slice { w : F_t(p, w) <= 1 } = ({dt = 1} ∩ C) - d/dt, as a star
    /// body in the tangent fibre. Convex, with exact support F*_t.
    pub fn cone_slice(&self, t: f64, p: &BasePoint) -> StarBody {
        let fam_r = self.family.clone();
        let fam_h = self.family.clone();
        let pr = *p;
        let ph = *p;
        StarBody::from_radial_and_support(
            self.base.dim(),
            move |u: &VecN| 1.0 / fam_r.eval_or_zero(t, &pr, u),
            move |u: &VecN| fam_h.dual_norm(t, &ph, u).unwrap_or(f64::NAN),
            true,
        )
    }

    /// The dual slice { v : F*_t(p, v) <= 1 } in the cotangent fibre.
    pub fn dual_slice(&self, t: f64, p: &BasePoint) -> StarBody {
        let fam_r = self.family.clone();
        let fam_h = self.family.clone();
        let pr = *p;
        let ph = *p;
        StarBody::from_radial_and_support(
            self.base.dim(),
            move |u: &VecN| 1.0 / fam_r.dual_norm(t, &pr, u).unwrap_or(f64::NAN),
            move |u: &VecN| fam_h.eval_or_zero(t, &ph, u),
            true,
        )
    }

    /// Cone dilated by `lambda` in the spatial directions (F -> F / lambda).
    pub fn dilate(&self, lambda: f64) -> Result<ConeStructure> {
        Ok(ConeStructure {
            base: self.base.clone(),
            family: self.family.scaled(1.0 / lambda)?,
        })
    }
}

type CoBallField = Arc<dyn Fn(f64, &BasePoint) -> StarBody + Send + Sync>;
type GFn = Arc<dyn Fn(f64, &BasePoint, &SpacetimeVector) -> f64 + Send + Sync>;

/// Proper cone structure with a 1-homogeneous concave G, cone = {G >= 0}.
#[derive(Clone)]
pub struct LorentzFinslerSpace {
    base: BaseManifold,
    g: GFn,
    co_ball: Option<CoBallField>,
}

impl LorentzFinslerSpace {
    /// Space with G(t, p, (w0, w)) = w0 - h_{K_t(p)}(w) for a co-ball field.
    pub fn from_co_ball_field<F>(base: BaseManifold, field: F) -> Self
    where
        F: Fn(f64, &BasePoint) -> StarBody + Send + Sync + 'static,
    {
        let field: CoBallField = Arc::new(field);
        let gf = field.clone();
        let g: GFn = Arc::new(move |t, p, sv| {
            if sv.spatial.is_zero() {
                return sv.dt;
            }
            let k = gf(t, p);
            sv.dt - convex::support_function(&k, &sv.spatial).unwrap_or(f64::NAN)
        });
        LorentzFinslerSpace { base, g, co_ball: Some(field) }
    }

    /// Space from a raw G callable (no co-ball data; slice checks skipped).
    pub fn from_g<F>(base: BaseManifold, g: F) -> Self
    where
        F: Fn(f64, &BasePoint, &SpacetimeVector) -> f64 + Send + Sync + 'static,
    {
        LorentzFinslerSpace { base, g: Arc::new(g), co_ball: None }
    }

    pub fn base(&self) -> &BaseManifold {
        &self.base
    }

    /// G(t, p, (w0, w)) = w0 - max_{v in K_t(p)} v(w).
    pub fn g_eval(&self, t: f64, p: &BasePoint, sv: &SpacetimeVector) -> f64 {
        (self.g)(t, p, sv)
    }

    /// Cone membership { G >= 0 }, excluding the zero vector.
    pub fn cone_contains(&self, t: f64, p: &BasePoint, sv: &SpacetimeVector) -> bool {
        !sv.is_zero() && self.g_eval(t, p, sv) >= 0.0
    }

    /// Co-ball K_t(p), when the space carries one.
    pub fn co_ball(&self, t: f64, p: &BasePoint) -> Option<StarBody> {
        self.co_ball.as_ref().map(|f| f(t, p))
    }

    /// Cone slice { w : G(t, p, (1, w)) >= 0 } = polar of the co-ball.
    pub fn slice(&self, t: f64, p: &BasePoint) -> Option<Result<StarBody>> {
        self.co_ball.as_ref().map(|f| convex::polar(&f(t, p)))
    }
}

/// Region of a locally Lipschitz check: a time interval, a spatial box and
/// the doubling interval for C^x, gridded at `lipschitz_step`.
#[derive(Clone, Debug)]
pub struct CheckRegion {
    pub t_range: (f64, f64),
    pub p_ranges: Vec<(f64, f64)>,
    pub s_range: (f64, f64),
    pub lipschitz_step: f64,
    /// Hausdorff directions for the C^x slices (0 = dimension default).
    pub lipschitz_directions: usize,
    /// Random (t, p, vector) samples per test.
    pub samples: usize,
    pub seed: u64,
}

impl CheckRegion {
    pub fn default_for(base: &BaseManifold) -> Self {
        let p_ranges = match base.topology() {
            Topology::Euclidean => vec![(-1.0, 1.0); base.dim()],
            Topology::Torus(periods) => periods.iter().map(|&l| (0.0, l)).collect(),
        };
        CheckRegion {
            t_range: (0.0, 1.0),
            p_ranges,
            s_range: (0.0, 0.2),
            lipschitz_step: 0.2,
            lipschitz_directions: 512,
            samples: 500,
            seed: 0x1CEB00DA,
        }
    }
}

/// Violation record: where and by how much.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub name: String,
    pub t: f64,
    pub p: Vec<f64>,
    pub magnitude: f64,
}

/// Outcome of `check_lorentz_finsler_space`.
#[derive(Clone, Debug, Serialize)]
pub struct LorentzFinslerReport {
    pub max_homogeneity_violation: f64,
    pub max_concavity_violation: f64,
    /// (grid cell, convex?) verdicts for cone slices; empty without co-ball.
    pub slice_convexity: Vec<(Vec<f64>, bool)>,
    pub all_slices_convex: bool,
    /// Lipschitz estimate of the doubled-cone slices; None without co-ball.
    pub lipschitz_estimate: Option<f64>,
    pub worst: Vec<Violation>,
}

/// Numerical audit of the locally Lipschitz Lorentz-Finsler structure:
/// homogeneity and fibre-wise concavity of G by sampling, convexity of the
/// cone slices, and the Lipschitz estimate of the C^x slices, realized as
/// polars of [-1,1] x K_t(p) one co-dimension up.
pub fn check_lorentz_finsler_space(
    space: &LorentzFinslerSpace,
    region: &CheckRegion,
) -> Result<LorentzFinslerReport> {
    let base = &space.base;
    let n = base.dim();
    let mut rng = SplitMix64::new(region.seed);
    let mut worst: Vec<Violation> = Vec::new();

    let sample_point = |rng: &mut SplitMix64| -> BasePoint {
        let coords: Vec<f64> =
            region.p_ranges.iter().map(|&(lo, hi)| rng.range(lo, hi)).collect();
        base.point(&coords).expect("region points are valid")
    };

    // Homogeneity: |G(lambda sv) - lambda G(sv)|.
    let mut max_hom: f64 = 0.0;
    for _ in 0..region.samples {
        let t = rng.range(region.t_range.0, region.t_range.1);
        let p = sample_point(&mut rng);
        let sv = SpacetimeVector::new(rng.range(-2.0, 2.0), rng.vector(n));
        let lambda = rng.range(0.1, 10.0);
        let g1 = space.g_eval(t, &p, &sv.scale(lambda));
        let g0 = space.g_eval(t, &p, &sv);
        let viol = (g1 - lambda * g0).abs();
        if viol > max_hom {
            max_hom = viol;
            worst.push(Violation {
                name: "homogeneity".into(),
                t,
                p: p.coords().as_slice().to_vec(),
                magnitude: viol,
            });
        }
    }

    // Concavity: midpoint test per fibre. Half the pairs are global, half
    // are near-coincident; kinks only show up against nearby pairs, where
    // the honest concave deficit is quadratically small.
    let mut max_conc: f64 = 0.0;
    for k in 0..region.samples {
        let t = rng.range(region.t_range.0, region.t_range.1);
        let p = sample_point(&mut rng);
        let a = SpacetimeVector::new(rng.range(-2.0, 2.0), rng.vector(n));
        let b = if k % 2 == 0 {
            SpacetimeVector::new(rng.range(-2.0, 2.0), rng.vector(n))
        } else {
            SpacetimeVector::new(
                a.dt + rng.range(-0.05, 0.05),
                a.spatial + rng.vector(n).scale(0.05),
            )
        };
        let mid = SpacetimeVector::new(
            0.5 * (a.dt + b.dt),
            (a.spatial + b.spatial).scale(0.5),
        );
        let viol =
            0.5 * (space.g_eval(t, &p, &a) + space.g_eval(t, &p, &b)) - space.g_eval(t, &p, &mid);
        if viol > max_conc {
            max_conc = viol;
            worst.push(Violation {
                name: "concavity".into(),
                t,
                p: p.coords().as_slice().to_vec(),
                magnitude: viol,
            });
        }
    }

    // Slice convexity and the C^x Lipschitz estimate need co-ball data.
    let mut slice_convexity = Vec::new();
    let mut all_convex = true;
    let mut lipschitz = None;
    if let Some(field) = &space.co_ball {
        let grid = 3usize;
        for it in 0..grid {
            let t = region.t_range.0
                + (region.t_range.1 - region.t_range.0) * it as f64 / (grid - 1) as f64;
            for ip in 0..grid {
                let coords: Vec<f64> = region
                    .p_ranges
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * ip as f64 / (grid - 1) as f64)
                    .collect();
                let p = base.point(&coords)?;
                let slice = convex::polar(&field(t, &p))?;
                let ok = convex::is_convex(&slice);
                all_convex &= ok;
                let mut cell = vec![t];
                cell.extend_from_slice(coords.as_slice());
                slice_convexity.push((cell, ok));
            }
        }

        // C^x(s, t, p) ∩ {dt = 1} is the polar of [-1, 1] x K_t(p); the
        // doubling coordinate s is a passenger in the field.
        // Validate the construction once before the grid sweep so bad
        // co-ball data fails as an error, not inside the field closure.
        {
            let p0 = base.point(
                &region.p_ranges.iter().map(|r| r.0).collect::<Vec<_>>(),
            )?;
            let k0 = field(region.t_range.0, &p0);
            convex::polar(&k0.product_interval(1.0)?)?;
        }
        let field = field.clone();
        let base_cl = base.clone();
        let mut ranges = vec![region.s_range, region.t_range];
        ranges.extend_from_slice(&region.p_ranges);
        // A non-convex doubled-cone slice is reported, not thrown.
        match convex::lipschitz_estimate_with(
            move |c: &[f64]| {
                let t = c[1];
                let p = base_cl.point(&c[2..]).expect("grid point valid");
                let k = field(t, &p);
                convex::polar(&k.product_interval(1.0).expect("valid product"))
                    .expect("co-ball polar")
            },
            &ranges,
            region.lipschitz_step,
            region.lipschitz_directions,
        ) {
            Ok(est) => lipschitz = Some(est),
            Err(Error::NonConvex) => {
                all_convex = false;
                worst.push(Violation {
                    name: "doubled-cone slice not convex".into(),
                    t: region.t_range.0,
                    p: vec![],
                    magnitude: f64::NAN,
                });
            }
            Err(e) => return Err(e),
        }
    }

    worst.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    worst.truncate(8);
    Ok(LorentzFinslerReport {
        max_homogeneity_violation: max_hom,
        max_concavity_violation: max_conc,
        slice_convexity,
        all_slices_convex: all_convex,
        lipschitz_estimate: lipschitz,
        worst,
    })
}
