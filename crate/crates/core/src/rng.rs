//! SplitMix64 pseudo-random generator.
//!
//! Hand-rolled so that scenario artifacts are bit-reproducible across
//! builds and platforms; the sequence is part of the output contract.

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Non-zero vector with components in [-1, 1).
    pub fn vector(&mut self, dim: usize) -> crate::vecn::VecN {
        loop {
            let mut v = crate::vecn::VecN::zeros(dim);
            for i in 0..dim {
                v[i] = self.range(-1.0, 1.0);
            }
            if v.norm() > 1e-3 {
                return v;
            }
        }
    }

    /// Uniform direction on the unit sphere.
    pub fn direction(&mut self, dim: usize) -> crate::vecn::VecN {
        loop {
            let v = self.vector(dim);
            if v.norm() <= 1.0 {
                return v.normalized().unwrap();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_sequence() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_range() {
        let mut r = SplitMix64::new(7);
        for _ in 0..1000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }
}
