//! Periodic boxes (ℤ/Mℤ)ᵈ with row-major site indexing.
//!
//! Unlike [`crate::TorusGrid`] the side length here may be odd or small, which
//! is what the percolation and Ising oracles need (a 3-cycle is a box of side 3).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicBox {
    d: usize,
    side: usize,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl PeriodicBox {
    pub fn new(d: usize, side: usize) -> Result<Self> {
        if d == 0 {
            return Err(LabError::invalid("d", "dimension must be positive"));
        }
        if side < 2 {
            return Err(LabError::invalid("side", "side length must be at least 2"));
        }
        let total = (side as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
        if total > (1u128 << 34) {
            return Err(LabError::SizeGuard {
                what: "periodic box".into(),
                size: usize::MAX,
                limit: 1 << 34,
            });
        }
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * side;
        }
        Ok(Self { d, side, strides })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    /// Site index of an arbitrary integer point (coordinates reduced mod side).
    pub fn index_of(&self, x: &[i64]) -> usize {
        debug_assert_eq!(x.len(), self.d);
        let m = self.side as i64;
        x.iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c.rem_euclid(m) as usize * s)
            .sum()
    }

    /// Coordinates in `0..side`.
    pub fn coords(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.d];
        for j in (0..self.d).rev() {
            out[j] = (idx % self.side) as i64;
            idx /= self.side;
        }
        out
    }

    /// Minimal-image representative in `{-⌈M/2⌉, …, ⌈M/2⌉-1}`; for even `M`
    /// this is `{-M/2, …, M/2-1}`.
    pub fn centered(&self, idx: usize) -> Vec<i64> {
        let half = self.side.div_ceil(2) as i64;
        let m = self.side as i64;
        self.coords(idx)
            .into_iter()
            .map(|c| if c < half { c } else { c - m })
            .collect()
    }

    /// Squared Euclidean norm of the minimal image of `idx`.
    pub fn min_image_norm_sq(&self, idx: usize) -> i64 {
        let m = self.side as i64;
        self.coords(idx)
            .into_iter()
            .map(|c| {
                let a = c.min(m - c);
                a * a
            })
            .sum()
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let mut out = 0;
        let (mut a, mut b) = (a, b);
        for &s in &self.strides {
            let ca = a / s;
            let cb = b / s;
            a %= s;
            b %= s;
            out += ((ca + cb) % self.side) * s;
        }
        out
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }

    pub fn neg(&self, a: usize) -> usize {
        let mut out = 0;
        let mut a = a;
        for &s in &self.strides {
            let c = a / s;
            a %= s;
            out += ((self.side - c) % self.side) * s;
        }
        out
    }

    /// `(f*g)(x) = Σ_y f(y) g(x-y)` by direct summation, O(N²).
    pub fn convolve_direct(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.num_sites();
        assert_eq!(f.len(), n);
        assert_eq!(g.len(), n);
        let mut out = vec![0.0; n];
        for (y, &fy) in f.iter().enumerate() {
            if fy == 0.0 {
                continue;
            }
            for (w, &gw) in g.iter().enumerate() {
                if gw != 0.0 {
                    out[self.add(y, w)] += fy * gw;
                }
            }
        }
        out
    }

    /// True when `f(x) = f(-x)` for every site, up to `tol`.
    pub fn is_symmetric(&self, f: &[f64], tol: f64) -> bool {
        (0..self.num_sites()).all(|x| (f[x] - f[self.neg(x)]).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_even_and_odd() {
        let b = PeriodicBox::new(1, 8).unwrap();
        let c: Vec<i64> = (0..8).map(|i| b.centered(i)[0]).collect();
        assert_eq!(c, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        let b = PeriodicBox::new(1, 3).unwrap();
        let c: Vec<i64> = (0..3).map(|i| b.centered(i)[0]).collect();
        assert_eq!(c, vec![0, 1, -1]);
    }

    #[test]
    fn arithmetic_wraps() {
        let b = PeriodicBox::new(2, 5).unwrap();
        let a = b.index_of(&[4, 1]);
        let c = b.index_of(&[3, 4]);
        assert_eq!(b.coords(b.add(a, c)), vec![2, 0]);
        assert_eq!(b.coords(b.sub(a, c)), vec![1, 2]);
        assert_eq!(b.add(a, b.neg(a)), 0);
        assert_eq!(b.index_of(&[-1, -6]), b.index_of(&[4, 4]));
    }

    #[test]
    fn rejects_degenerate() {
        assert!(PeriodicBox::new(0, 4).is_err());
        assert!(PeriodicBox::new(2, 1).is_err());
    }

    #[test]
    fn direct_convolution_of_delta_is_identity() {
        let b = PeriodicBox::new(2, 3).unwrap();
        let mut delta = vec![0.0; 9];
        delta[0] = 1.0;
        let g: Vec<f64> = (0..9).map(|i| i as f64).collect();
        assert_eq!(b.convolve_direct(&delta, &g), g);
    }
}
