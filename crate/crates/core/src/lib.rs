//! Numerical engine for cone structures on product spacetimes R x Sigma
//! and the contact dynamics they induce on the spherical cotangent bundle
//! of the base.
//!
//! The crate is organized around five layers:
//!
//! * [`base`] / [`finsler`] — flat base manifolds and time-dependent
//!   Finsler metric families, with fundamental tensors, Legendre transforms
//!   and dual norms.
//! * [`convex`] — fibre-wise star-shaped bodies, support functions, polar
//!   duality, Hausdorff distance and Lipschitz estimation.
//! * [`cone`] — cone structures of splitting type, causal classification of
//!   vectors and locally Lipschitz Lorentz-Finsler spaces.
//! * [`dynamics`] / [`contact`] — cogeodesic and Lagrangian geodesic
//!   integration, positive paths on the cotangent side, Reeb-condition
//!   checks, positivity margins, skies and sky isotopies.
//! * [`correspondence`] — the two constructions cone -> path and
//!   path -> cone, roundtrip verification and the Cauchy-crossing probe.
//!
//! ```
//! use lightcone_core::{BaseManifold, VecN};
//! use lightcone_core::finsler::FinslerFamily;
//! use lightcone_core::cone::ConeStructure;
//! use lightcone_core::correspondence::path_from_cone;
//! use lightcone_core::dynamics::{IntegratorConfig, RayPoint};
//!
//! // Flat cone dt^2 - |dw|^2 on R^2; its positive path translates rays.
//! let base = BaseManifold::euclidean(2)?;
//! let cone = ConeStructure::new(base.clone(), FinslerFamily::euclidean(2))?;
//! let path = path_from_cone(&cone, IntegratorConfig { step: 0.05, ..Default::default() });
//! let ray = RayPoint::unit_euclidean(base.origin(), VecN::from_slice(&[1.0, 0.0]))?;
//! let moved = path.apply(1.0, &ray)?;
//! assert!((moved.p.coords()[0] - 1.0).abs() < 1e-9);
//! # Ok::<(), lightcone_core::Error>(())
//! ```

pub mod base;
pub mod cone;
pub mod contact;
pub mod convex;
pub mod correspondence;
pub mod directions;
pub mod dynamics;
pub mod error;
pub mod finsler;
pub mod rng;
pub mod vecn;

pub use base::{BaseManifold, BasePoint, SpacetimeCurve, SpacetimeEvent, SpacetimeVector, Topology};
pub use error::{Error, Result};
pub use vecn::{MatN, VecN};
