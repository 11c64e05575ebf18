//! Periodic grids (ℤ/Mℤ)ᵈ with M even, fields on them, and exact discrete
//! Fourier transforms with the convention f̂(k) = Σ_x f(x) e^{ik·x}.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::PeriodicBox;
use crate::step_dist::StepDistribution;

/// Size guard for the O(N²) direct convolution oracle.
pub const DIRECT_CONVOLUTION_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    X,
    K,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::X => "x",
            Space::K => "k",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    d: usize,
    m: usize,
    #[serde(skip)]
    lattice: Option<PeriodicBox>,
}

impl TorusGrid {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if m < 4 || !m.is_multiple_of(2) {
            return Err(LabError::invalid("M", "side length must be even and at least 4"));
        }
        let lattice = PeriodicBox::new(d, m)?;
        Ok(Self {
            d,
            m,
            lattice: Some(lattice),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn num_sites(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn lattice(&self) -> &PeriodicBox {
        self.lattice.as_ref().expect("grid constructed through TorusGrid::new")
    }

    /// Centered coordinates of site (or dual index) `idx`, in `{-M/2, …, M/2-1}`.
    pub fn centered(&self, idx: usize) -> Vec<i64> {
        self.lattice().centered(idx)
    }

    pub fn index_of(&self, x: &[i64]) -> usize {
        self.lattice().index_of(x)
    }

    /// The dual point 2πm/M of dual index `idx`.
    pub fn k_vector(&self, idx: usize) -> Vec<f64> {
        let s = 2.0 * PI / self.m as f64;
        self.centered(idx).into_iter().map(|c| s * c as f64).collect()
    }

    pub fn k_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.num_sites()).map(|i| self.k_vector(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    grid: TorusGrid,
    space: Space,
    values: Vec<Complex64>,
}

impl TorusField {
    pub fn new(grid: &TorusGrid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.num_sites() {
            return Err(LabError::DimensionMismatch {
                expected: grid.num_sites(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            space,
            values,
        })
    }

    pub fn from_real(grid: &TorusGrid, space: Space, values: &[f64]) -> Result<Self> {
        Self::new(grid, space, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: &TorusGrid, space: Space) -> Self {
        Self {
            grid: grid.clone(),
            space,
            values: vec![Complex64::new(0.0, 0.0); grid.num_sites()],
        }
    }

    pub fn delta(grid: &TorusGrid) -> Self {
        let mut f = Self::zeros(grid, Space::X);
        f.values[0] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, c| m.max(c.im.abs()))
    }

    pub fn get(&self, idx: &[i64]) -> Complex64 {
        self.values[self.grid.index_of(idx)]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            space: self.space,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// g(x) = g(−x) for every site, within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let lat = self.grid.lattice();
        (0..self.values.len()).all(|i| (self.values[i] - self.values[lat.neg(i)]).norm() <= tol)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).sum()
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    fn expect(&self, space: Space) -> Result<()> {
        if self.space != space {
            return Err(LabError::SpaceMismatch {
                expected: space.to_string(),
                got: self.space.to_string(),
            });
        }
        Ok(())
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch);
        }
        Ok(())
    }

    /// Pointwise product of two fields in the same space.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        if self.space != other.space {
            return Err(LabError::SpaceMismatch {
                expected: self.space.to_string(),
                got: other.space.to_string(),
            });
        }
        Ok(Self {
            grid: self.grid.clone(),
            space: self.space,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }
}

/// Applies a 1-D transform along every axis of a row-major array of side `m`.
fn transform_axes(values: &mut [Complex64], d: usize, m: usize, fft: &dyn Fft<f64>) {
    let n = values.len();
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        let block = stride * m;
        // Lines along `axis` start at offsets (outer * block + inner), inner < stride.
        values.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); m];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for inner in 0..stride {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = chunk[inner + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    chunk[inner + j * stride] = *v;
                }
            }
        });
        debug_assert_eq!(n % block, 0);
    }
}

/// f̂(k) = Σ_x f(x) e^{ik·x}.
pub fn dft(field: &TorusField) -> Result<TorusField> {
    field.expect(Space::X)?;
    let g = &field.grid;
    let mut values = field.values.clone();
    let fft = FftPlanner::new().plan_fft_inverse(g.m);
    transform_axes(&mut values, g.d, g.m, fft.as_ref());
    Ok(TorusField {
        grid: g.clone(),
        space: Space::K,
        values,
    })
}

/// f(x) = M^{-d} Σ_k f̂(k) e^{-ik·x}.
pub fn idft(field: &TorusField) -> Result<TorusField> {
    field.expect(Space::K)?;
    let g = &field.grid;
    let mut values = field.values.clone();
    let fft = FftPlanner::new().plan_fft_forward(g.m);
    transform_axes(&mut values, g.d, g.m, fft.as_ref());
    let scale = 1.0 / values.len() as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(TorusField {
        grid: g.clone(),
        space: Space::X,
        values,
    })
}

/// (f∗g)(x) = Σ_y f(y) g(x−y) on the torus, via the transform.
pub fn convolve(f: &TorusField, g: &TorusField) -> Result<TorusField> {
    f.same_grid(g)?;
    f.expect(Space::X)?;
    g.expect(Space::X)?;
    idft(&dft(f)?.mul(&dft(g)?)?)
}

/// Direct O(N²) convolution; refuses grids with more than 4096 sites.
pub fn convolve_direct(f: &TorusField, g: &TorusField) -> Result<TorusField> {
    f.same_grid(g)?;
    f.expect(Space::X)?;
    g.expect(Space::X)?;
    let n = f.grid.num_sites();
    if n > DIRECT_CONVOLUTION_LIMIT {
        return Err(LabError::SizeGuard {
            what: "direct convolution".into(),
            size: n,
            limit: DIRECT_CONVOLUTION_LIMIT,
        });
    }
    let lat = f.grid.lattice();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (y, &fy) in f.values.iter().enumerate() {
        for (w, &gw) in g.values.iter().enumerate() {
            out[lat.add(y, w)] += fy * gw;
        }
    }
    TorusField::new(&f.grid, Space::X, out)
}

/// Δ_k ĝ(l) = ĝ(l−k) + ĝ(l+k) − 2ĝ(l), dual indices wrapped periodically.
pub fn delta_k(ghat: &TorusField, k_index: &[i64], l_index: &[i64]) -> Result<Complex64> {
    ghat.expect(Space::K)?;
    let d = ghat.grid.d;
    if k_index.len() != d || l_index.len() != d {
        return Err(LabError::DimensionMismatch {
            expected: d,
            got: k_index.len().min(l_index.len()),
        });
    }
    let minus: Vec<i64> = l_index.iter().zip(k_index).map(|(l, k)| l - k).collect();
    let plus: Vec<i64> = l_index.iter().zip(k_index).map(|(l, k)| l + k).collect();
    Ok(ghat.get(&minus) + ghat.get(&plus) - 2.0 * ghat.get(l_index))
}

/// Σ_x [1 − cos(k·x)] |g(x)| with x in the centered fundamental domain and
/// k = 2π·k_index/M.
pub fn one_minus_cos_sum(g: &TorusField, k_index: &[i64]) -> Result<f64> {
    g.expect(Space::X)?;
    let grid = &g.grid;
    if k_index.len() != grid.d {
        return Err(LabError::DimensionMismatch {
            expected: grid.d,
            got: k_index.len(),
        });
    }
    let s = 2.0 * PI / grid.m as f64;
    Ok(g.values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() != 0.0)
        .map(|(i, v)| {
            let x = grid.centered(i);
            let dot: f64 = x.iter().zip(k_index).map(|(&a, &b)| (a * b) as f64).sum::<f64>() * s;
            (1.0 - dot.cos()) * v.norm()
        })
        .sum())
}

#[derive(Clone, Debug)]
pub struct FoldedDistribution {
    pub field: TorusField,
    /// Truncated mass, spread uniformly over the sites.
    pub tail_mass: f64,
}

/// D_M(x) = Σ_{y ≡ x mod M} D(y), over the enumerated support. Any truncated
/// tail mass is added uniformly, so that Σ_x D_M(x) = 1.
pub fn fold_distribution(dist: &StepDistribution, grid: &TorusGrid) -> Result<FoldedDistribution> {
    let values = fold_onto_box(dist, grid.lattice())?;
    Ok(FoldedDistribution {
        field: TorusField::from_real(grid, Space::X, &values)?,
        tail_mass: dist.tail_mass(),
    })
}

/// Folds D onto an arbitrary periodic box (any side length).
pub fn fold_onto_box(dist: &StepDistribution, lattice: &PeriodicBox) -> Result<Vec<f64>> {
    if dist.dim() != lattice.dim() {
        return Err(LabError::DimensionMismatch {
            expected: lattice.dim(),
            got: dist.dim(),
        });
    }
    let n = lattice.num_sites();
    let mut values = vec![0.0; n];
    let mut x = vec![0i64; dist.dim()];
    for (p, w) in dist.support().iter() {
        for (a, &b) in x.iter_mut().zip(p) {
            *a = b as i64;
        }
        values[lattice.index_of(&x)] += w;
    }
    let tail = dist.tail_mass();
    if tail > 0.0 {
        let share = tail / n as f64;
        values.iter_mut().for_each(|v| *v += share);
    }
    Ok(values)
}

/// D̂_M on the dual grid, as a real vector indexed like the grid.
pub fn folded_symbol(dist: &StepDistribution, grid: &TorusGrid) -> Result<Vec<f64>> {
    let folded = fold_distribution(dist, grid)?;
    Ok(dft(&folded.field)?.real())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(2, 3).is_err());
        assert!(TorusGrid::new(2, 2).is_err());
        assert!(TorusGrid::new(0, 4).is_err());
        let g = TorusGrid::new(3, 4).unwrap();
        assert_eq!(g.num_sites(), 64);
    }

    #[test]
    fn delta_transforms_to_one() {
        let g = TorusGrid::new(2, 6).unwrap();
        let k = dft(&TorusField::delta(&g)).unwrap();
        assert!(k.values().iter().all(|v| (v - c(1.0)).norm() < 1e-15));
    }

    #[test]
    fn constant_transforms_to_delta() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = TorusField::from_real(&g, Space::X, &[1.0 / 16.0; 16]).unwrap();
        let k = dft(&f).unwrap();
        assert!((k.values()[0] - c(1.0)).norm() < 1e-15);
        assert!(k.values()[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn sign_convention_is_positive_exponent() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut f = TorusField::zeros(&g, Space::X);
        f.values_mut()[1] = c(1.0);
        let k = dft(&f).unwrap();
        for i in 0..8 {
            let t = g.k_vector(i)[0];
            assert!((k.values()[i] - Complex64::new(t.cos(), t.sin())).norm() < 1e-14);
        }
    }

    #[test]
    fn tag_mismatch() {
        let g = TorusGrid::new(1, 4).unwrap();
        let f = TorusField::zeros(&g, Space::K);
        assert!(matches!(dft(&f), Err(LabError::SpaceMismatch { .. })));
        assert!(matches!(
            idft(&TorusField::delta(&g)),
            Err(LabError::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn fold_nn_no_aliasing() {
        let g = TorusGrid::new(1, 8).unwrap();
        let dist = StepDistribution::nearest_neighbor(1).unwrap();
        let f = fold_distribution(&dist, &g).unwrap().field.real();
        assert_eq!(f, vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn fold_uniform_wraps() {
        let g = TorusGrid::new(1, 4).unwrap();
        let dist = StepDistribution::uniform(1, 2).unwrap();
        let f = fold_distribution(&dist, &g).unwrap().field.real();
        assert_eq!(f, vec![0.0, 0.25, 0.5, 0.25]);
    }

    #[test]
    fn folded_nn_symbol_matches_closed_form() {
        let g = TorusGrid::new(2, 8).unwrap();
        let dist = StepDistribution::nearest_neighbor(2).unwrap();
        let sym = folded_symbol(&dist, &g).unwrap();
        let idx = g.index_of(&[1, 0]);
        assert_relative_eq!(sym[idx], ((PI / 4.0).cos() + 1.0) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn delta_k_of_cosine() {
        let g = TorusGrid::new(1, 8).unwrap();
        let vals: Vec<f64> = (0..8).map(|i| g.k_vector(i)[0].cos()).collect();
        let ghat = TorusField::from_real(&g, Space::K, &vals).unwrap();
        for l in -4..4 {
            let v = delta_k(&ghat, &[4], &[l]).unwrap();
            let lk = 2.0 * PI * l as f64 / 8.0;
            assert!((v.re + 4.0 * lk.cos()).abs() < 1e-14);
        }
        assert_eq!(delta_k(&ghat, &[0], &[3]).unwrap(), c(0.0));
    }

    #[test]
    fn one_minus_cos_nn() {
        let g = TorusGrid::new(1, 8).unwrap();
        let dist = StepDistribution::nearest_neighbor(1).unwrap();
        let f = fold_distribution(&dist, &g).unwrap().field;
        assert_relative_eq!(one_minus_cos_sum(&f, &[4]).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(one_minus_cos_sum(&f, &[0]).unwrap(), 0.0);
        assert_eq!(one_minus_cos_sum(&TorusField::delta(&g), &[3]).unwrap(), 0.0);
    }

    #[test]
    fn nn_self_convolution() {
        let g = TorusGrid::new(1, 8).unwrap();
        let dist = StepDistribution::nearest_neighbor(1).unwrap();
        let f = fold_distribution(&dist, &g).unwrap().field;
        let dd = convolve(&f, &f).unwrap();
        let direct = convolve_direct(&f, &f).unwrap();
        assert_relative_eq!(dd.values()[0].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(dd.values()[2].re, 0.25, epsilon = 1e-15);
        for (a, b) in dd.values().iter().zip(direct.values()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn direct_convolution_guard() {
        let g = TorusGrid::new(2, 66).unwrap();
        let f = TorusField::delta(&g);
        assert!(matches!(convolve_direct(&f, &f), Err(LabError::SizeGuard { .. })));
    }
}
