//! Small fixed-capacity vectors and matrices for fibre dimensions 1..=4.
//!
//! Everything in this crate lives in flat charts of dimension at most 3,
//! plus one auxiliary axis for doubled cones and spacetime states, so a
//! stack-allocated `[f64; 4]` backing store covers all uses.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

pub const MAX_DIM: usize = 4;

/// Dense vector of dimension 1..=4.
#[derive(Clone, Copy, PartialEq)]
pub struct VecN {
    n: usize,
    a: [f64; MAX_DIM],
}

impl VecN {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} out of range");
        VecN { n, a: [0.0; MAX_DIM] }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut v = VecN::zeros(s.len());
        v.a[..s.len()].copy_from_slice(s);
        v
    }

    /// Standard basis vector e_i.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = VecN::zeros(n);
        v.a[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.n]
    }

    pub fn dot(&self, other: &VecN) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.a[i] * other.a[i];
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> VecN {
        let mut v = *self;
        for i in 0..self.n {
            v.a[i] *= c;
        }
        v
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<VecN> {
        let r = self.norm();
        if r > 0.0 && r.is_finite() {
            Some(self.scale(1.0 / r))
        } else {
            None
        }
    }

    /// Angle to another vector in [0, pi]; zero vectors give 0.
    pub fn angle_to(&self, other: &VecN) -> f64 {
        let d = self.norm() * other.norm();
        if d == 0.0 {
            return 0.0;
        }
        (self.dot(other) / d).clamp(-1.0, 1.0).acos()
    }

    /// Prepend one extra component, raising the dimension by one.
    pub fn extend(&self, x0: f64) -> VecN {
        assert!(self.n < MAX_DIM);
        let mut v = VecN::zeros(self.n + 1);
        v.a[0] = x0;
        for i in 0..self.n {
            v.a[i + 1] = self.a[i];
        }
        v
    }

    /// Drop the leading component (inverse of `extend`).
    pub fn tail(&self) -> VecN {
        assert!(self.n >= 2);
        let mut v = VecN::zeros(self.n - 1);
        for i in 0..self.n - 1 {
            v.a[i] = self.a[i + 1];
        }
        v
    }
}

impl Index<usize> for VecN {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.n);
        &self.a[i]
    }
}

impl IndexMut<usize> for VecN {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.n);
        &mut self.a[i]
    }
}

impl Add for VecN {
    type Output = VecN;
    fn add(self, rhs: VecN) -> VecN {
        debug_assert_eq!(self.n, rhs.n);
        let mut v = self;
        for i in 0..self.n {
            v.a[i] += rhs.a[i];
        }
        v
    }
}

impl AddAssign for VecN {
    fn add_assign(&mut self, rhs: VecN) {
        debug_assert_eq!(self.n, rhs.n);
        for i in 0..self.n {
            self.a[i] += rhs.a[i];
        }
    }
}

impl Sub for VecN {
    type Output = VecN;
    fn sub(self, rhs: VecN) -> VecN {
        debug_assert_eq!(self.n, rhs.n);
        let mut v = self;
        for i in 0..self.n {
            v.a[i] -= rhs.a[i];
        }
        v
    }
}

impl Neg for VecN {
    type Output = VecN;
    fn neg(self) -> VecN {
        self.scale(-1.0)
    }
}

impl Mul<f64> for VecN {
    type Output = VecN;
    fn mul(self, c: f64) -> VecN {
        self.scale(c)
    }
}

impl fmt::Debug for VecN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VecN{:?}", self.as_slice())
    }
}

/// Dense square matrix of dimension 1..=4, row major.
#[derive(Clone, Copy, PartialEq)]
pub struct MatN {
    n: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl MatN {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} out of range");
        MatN { n, a: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = MatN::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = MatN::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i][i] = x;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = MatN::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            m.a[i][..n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.a[i][j] = x;
    }

    pub fn matvec(&self, v: &VecN) -> VecN {
        debug_assert_eq!(self.n, v.dim());
        let mut out = VecN::zeros(self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for j in 0..self.n {
                s += self.a[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Quadratic form v^T M v.
    pub fn quadratic(&self, v: &VecN) -> f64 {
        self.matvec(v).dot(v)
    }

    pub fn transpose(&self) -> MatN {
        let mut m = MatN::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] = self.a[j][i];
            }
        }
        m
    }

    pub fn scale(&self, c: f64) -> MatN {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] *= c;
            }
        }
        m
    }

    pub fn add(&self, other: &MatN) -> MatN {
        debug_assert_eq!(self.n, other.n);
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] += other.a[i][j];
            }
        }
        m
    }

    pub fn sub(&self, other: &MatN) -> MatN {
        self.add(&other.scale(-1.0))
    }

    /// Outer product u v^T.
    pub fn outer(u: &VecN, v: &VecN) -> MatN {
        debug_assert_eq!(u.dim(), v.dim());
        let n = u.dim();
        let mut m = MatN::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = u[i] * v[j];
            }
        }
        m
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        worst
    }

    /// Solve M x = b by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &VecN) -> Option<VecN> {
        debug_assert_eq!(self.n, b.dim());
        let n = self.n;
        if n == 2 {
            let det = self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let mut x = VecN::zeros(2);
            x.a[0] = (b.a[0] * self.a[1][1] - b.a[1] * self.a[0][1]) / det;
            x.a[1] = (b.a[1] * self.a[0][0] - b.a[0] * self.a[1][0]) / det;
            return Some(x);
        }
        let mut m = self.a;
        let mut rhs = *b;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m[r][col].abs() > m[piv][col].abs() {
                    piv = r;
                }
            }
            if m[piv][col].abs() < 1e-300 {
                return None;
            }
            m.swap(col, piv);
            let tmp = rhs[col];
            rhs[col] = rhs[piv];
            rhs[piv] = tmp;
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut x = VecN::zeros(n);
        for row in (0..n).rev() {
            let mut s = rhs[row];
            for c in row + 1..n {
                s -= m[row][c] * x[c];
            }
            x[row] = s / m[row][row];
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<MatN> {
        let n = self.n;
        // Closed forms for the common small cases; Gauss otherwise.
        if n == 1 {
            if self.a[0][0] == 0.0 {
                return None;
            }
            let mut inv = MatN::zeros(1);
            inv.a[0][0] = 1.0 / self.a[0][0];
            return Some(inv);
        }
        if n == 2 {
            let det = self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let mut inv = MatN::zeros(2);
            inv.a[0][0] = self.a[1][1] / det;
            inv.a[0][1] = -self.a[0][1] / det;
            inv.a[1][0] = -self.a[1][0] / det;
            inv.a[1][1] = self.a[0][0] / det;
            return Some(inv);
        }
        let mut inv = MatN::zeros(n);
        for j in 0..n {
            let col = self.solve(&VecN::basis(n, j))?;
            for i in 0..n {
                inv.a[i][j] = col[i];
            }
        }
        Some(inv)
    }

    pub fn det(&self) -> f64 {
        let n = self.n;
        if n == 1 {
            return self.a[0][0];
        }
        if n == 2 {
            return self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0];
        }
        let mut m = self.a;
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m[r][col].abs() > m[piv][col].abs() {
                    piv = r;
                }
            }
            if m[piv][col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                m.swap(col, piv);
                det = -det;
            }
            det *= m[col][col];
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
        det
    }

    /// Positive definiteness via Sylvester's criterion on leading minors.
    pub fn is_positive_definite(&self) -> bool {
        for k in 1..=self.n {
            let mut sub = MatN::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    sub.a[i][j] = self.a[i][j];
                }
            }
            if !(sub.det() > 0.0) {
                return false;
            }
        }
        true
    }
}

impl fmt::Debug for MatN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatN[")?;
        for i in 0..self.n {
            write!(f, "{:?}", &self.a[i][..self.n])?;
            if i + 1 < self.n {
                write!(f, ", ")?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norm() {
        let v = VecN::from_slice(&[3.0, 4.0]);
        assert_eq!(v.norm(), 5.0);
        assert_eq!(v.dot(&VecN::from_slice(&[1.0, 1.0])), 7.0);
    }

    #[test]
    fn solve_matches_matvec() {
        let m = MatN::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let b = VecN::from_slice(&[3.0, 5.0]);
        let x = m.solve(&b).unwrap();
        assert!((m.matvec(&x) - b).norm() < 1e-12);
        let inv = m.inverse().unwrap();
        assert!((inv.matvec(&b) - x).norm() < 1e-12);
    }

    #[test]
    fn positive_definite() {
        assert!(MatN::diagonal(&[4.0, 1.0]).is_positive_definite());
        assert!(!MatN::diagonal(&[4.0, -1.0]).is_positive_definite());
        // Symmetric indefinite with positive diagonal.
        let m = MatN::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(!m.is_positive_definite());
    }

    #[test]
    fn det_3x3() {
        let m = MatN::from_rows(&[&[2.0, 0.0, 0.0], &[0.0, 3.0, 0.0], &[0.0, 0.0, 4.0]]);
        assert!((m.det() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn extend_tail_roundtrip() {
        let v = VecN::from_slice(&[1.0, 2.0]);
        let e = v.extend(-3.0);
        assert_eq!(e.as_slice(), &[-3.0, 1.0, 2.0]);
        assert_eq!(e.tail().as_slice(), &[1.0, 2.0]);
    }
}
