//! Flat base manifolds and the tangent/cotangent bookkeeping over them.
//!
//! Supported bases are Euclidean charts R^n and flat tori with a fundamental
//! domain [0, L_i) per axis, n in {1, 2, 3}. Points on tori are stored
//! wrapped into the fundamental domain; vector and covector components are
//! always global flat-chart components and never wrap.

use crate::error::{Error, Result};
use crate::vecn::VecN;

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    Euclidean,
    /// Flat torus with one strictly positive period per axis.
    Torus(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaseManifold {
    dim: usize,
    topology: Topology,
}

impl BaseManifold {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Invalid(format!("base dimension {dim} not in 1..=3")));
        }
        Ok(BaseManifold { dim, topology: Topology::Euclidean })
    }

    pub fn torus(periods: &[f64]) -> Result<Self> {
        let dim = periods.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Invalid(format!("base dimension {dim} not in 1..=3")));
        }
        if periods.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Invalid("torus periods must be strictly positive".into()));
        }
        Ok(BaseManifold { dim, topology: Topology::Torus(periods.to_vec()) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Construct a point, wrapping torus coordinates into [0, L).
    pub fn point(&self, coords: &[f64]) -> Result<BasePoint> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: coords.len() });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("point coordinates must be finite".into()));
        }
        let mut c = VecN::from_slice(coords);
        if let Topology::Torus(periods) = &self.topology {
            for i in 0..self.dim {
                c[i] = wrap(c[i], periods[i]);
            }
        }
        Ok(BasePoint { coords: c })
    }

    pub fn origin(&self) -> BasePoint {
        BasePoint { coords: VecN::zeros(self.dim) }
    }

    /// p + d, wrapped.
    pub fn displace(&self, p: &BasePoint, d: &VecN) -> BasePoint {
        let mut c = p.coords + *d;
        if let Topology::Torus(periods) = &self.topology {
            for i in 0..self.dim {
                c[i] = wrap(c[i], periods[i]);
            }
        }
        BasePoint { coords: c }
    }

    /// Minimal chart displacement from p to q (per-axis shortest on tori).
    pub fn delta(&self, p: &BasePoint, q: &BasePoint) -> VecN {
        let mut d = q.coords - p.coords;
        if let Topology::Torus(periods) = &self.topology {
            for i in 0..self.dim {
                let l = periods[i];
                d[i] = wrap(d[i] + 0.5 * l, l) - 0.5 * l;
            }
        }
        d
    }

    pub fn distance(&self, p: &BasePoint, q: &BasePoint) -> f64 {
        self.delta(p, q).norm()
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can return `period` itself from rounding at the seam.
    if r >= period {
        r - period
    } else {
        r
    }
}

/// Point of the base manifold, coordinates in the global flat chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasePoint {
    coords: VecN,
}

impl BasePoint {
    pub fn coords(&self) -> &VecN {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }
}

/// Event (t, p) on the product spacetime R x Sigma; t is Cauchy time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacetimeEvent {
    pub t: f64,
    pub p: BasePoint,
}

/// Tangent vector (w0, w) of R x Sigma; w0 is the dt-component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacetimeVector {
    pub dt: f64,
    pub spatial: VecN,
}

impl SpacetimeVector {
    pub fn new(dt: f64, spatial: VecN) -> Self {
        SpacetimeVector { dt, spatial }
    }

    pub fn is_zero(&self) -> bool {
        self.dt == 0.0 && self.spatial.is_zero()
    }

    pub fn norm(&self) -> f64 {
        (self.dt * self.dt + self.spatial.dot(&self.spatial)).sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        SpacetimeVector { dt: c * self.dt, spatial: self.spatial.scale(c) }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }
}

/// Sampled curve in R x Sigma: (parameter, event) pairs.
pub type SpacetimeCurve = Vec<(f64, SpacetimeEvent)>;
