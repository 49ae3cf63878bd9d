//! Deterministic unit-direction sets and local maximization on spheres.
//!
//! Direction sets are the shared sampling backbone for dual norms, support
//! functions and Hausdorff distances: uniform angles for n = 2, a Fibonacci
//! spiral for n = 3, a Hopf-coordinate grid for n = 4 and {+1, -1} for
//! n = 1. They are deterministic so that every report is reproducible.

use crate::vecn::VecN;

#[derive(Clone, Debug)]
pub struct DirectionSet {
    dim: usize,
    dirs: Vec<VecN>,
}

impl DirectionSet {
    /// Default direction count per fibre dimension.
    pub fn default_count(dim: usize) -> usize {
        match dim {
            1 => 2,
            2 => 512,
            3 => 2048,
            _ => 4096,
        }
    }

    pub fn canonical(dim: usize, count: usize) -> Self {
        let dirs = match dim {
            1 => vec![VecN::from_slice(&[1.0]), VecN::from_slice(&[-1.0])],
            2 => {
                let m = count.max(4);
                (0..m)
                    .map(|i| {
                        let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                        VecN::from_slice(&[th.cos(), th.sin()])
                    })
                    .collect()
            }
            3 => {
                // Fibonacci sphere.
                let m = count.max(8);
                let ga = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
                (0..m)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
                        let r = (1.0 - z * z).max(0.0).sqrt();
                        let phi = ga * i as f64;
                        VecN::from_slice(&[r * phi.cos(), r * phi.sin(), z])
                    })
                    .collect()
            }
            4 => {
                // Hopf-coordinate grid on S^3.
                let n_eta = ((count as f64 / 4.0).cbrt().round() as usize).max(3);
                let n_xi = ((count as f64 / n_eta as f64).sqrt().ceil() as usize).max(4);
                let mut dirs = Vec::with_capacity(n_eta * n_xi * n_xi);
                for j in 0..n_eta {
                    let eta = (j as f64 + 0.5) / n_eta as f64 * std::f64::consts::FRAC_PI_2;
                    for k in 0..n_xi {
                        let xi1 = 2.0 * std::f64::consts::PI * k as f64 / n_xi as f64;
                        for l in 0..n_xi {
                            let xi2 = 2.0 * std::f64::consts::PI * l as f64 / n_xi as f64;
                            dirs.push(VecN::from_slice(&[
                                eta.cos() * xi1.cos(),
                                eta.cos() * xi1.sin(),
                                eta.sin() * xi2.cos(),
                                eta.sin() * xi2.sin(),
                            ]));
                        }
                    }
                }
                dirs
            }
            _ => panic!("direction sets only exist for dim 1..=4"),
        };
        DirectionSet { dim, dirs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dirs(&self) -> &[VecN] {
        &self.dirs
    }

    /// Index of the direction maximizing f, with the value.
    pub fn argmax<F: Fn(&VecN) -> f64>(&self, f: F) -> (usize, f64) {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, u) in self.dirs.iter().enumerate() {
            let v = f(u);
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        (best, best_val)
    }
}

/// Result of a local spherical maximization.
pub struct SphereMax {
    pub dir: VecN,
    pub value: f64,
    pub converged: bool,
}

/// Locally maximize `f` over unit directions near `start`.
///
/// For n = 2 this is golden-section search on the angle over a bracket of
/// half-width `width`; for n >= 3 a shrinking-ring search in the tangent
/// plane. `tol` is the angular resolution at which the search stops.
pub fn refine_direction_max<F: Fn(&VecN) -> f64>(
    f: F,
    start: &VecN,
    width: f64,
    tol: f64,
) -> SphereMax {
    let dim = start.dim();
    match dim {
        1 => SphereMax { dir: *start, value: f(start), converged: true },
        2 => {
            let th0 = start[1].atan2(start[0]);
            let eval = |th: f64| f(&VecN::from_slice(&[th.cos(), th.sin()]));
            let (mut a, mut b) = (th0 - width, th0 + width);
            let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut fc, mut fd) = (eval(c), eval(d));
            let mut iter = 0usize;
            while (b - a) > tol && iter < 200 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = eval(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = eval(d);
                }
                iter += 1;
            }
            let th = 0.5 * (a + b);
            let dir = VecN::from_slice(&[th.cos(), th.sin()]);
            SphereMax { dir, value: f(&dir), converged: (b - a) <= tol }
        }
        _ => {
            // Orthonormal basis of the tangent plane at `start`.
            let mut basis: Vec<VecN> = Vec::new();
            for i in 0..dim {
                let mut e = VecN::basis(dim, i);
                let mut v = e;
                v += start.scale(-e.dot(start));
                for b in &basis {
                    let proj = v.dot(b);
                    e = *b;
                    v += e.scale(-proj);
                }
                if v.norm() > 1e-6 {
                    basis.push(v.normalized().unwrap());
                }
                if basis.len() == dim - 1 {
                    break;
                }
            }
            let ring = DirectionSet::canonical(dim - 1, if dim == 3 { 8 } else { 32 });
            let mut u = *start;
            let mut best = f(&u);
            let mut rho = width;
            let mut evals = 0usize;
            while rho > tol && evals < 20_000 {
                let mut improved = false;
                for c in ring.dirs() {
                    let mut d = u.scale(rho.cos());
                    for (k, b) in basis.iter().enumerate() {
                        d += b.scale(rho.sin() * c[k]);
                    }
                    let d = d.normalized().unwrap();
                    let v = f(&d);
                    evals += 1;
                    if v > best {
                        best = v;
                        u = d;
                        improved = true;
                    }
                }
                if !improved {
                    rho *= 0.5;
                }
            }
            SphereMax { dir: u, value: best, converged: rho <= tol }
        }
    }
}
