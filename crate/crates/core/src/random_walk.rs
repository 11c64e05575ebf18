//! Random-walk Green's function, return probabilities, and the bubble /
//! triangle integrals β = ∫ D̂²/(1−D̂)^s of the random walk.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::{DualGrid, KPoint};
use crate::step_dist::{DistSpec, Family, StepDistribution};
use crate::torus::{convolve, dft, fold_distribution, idft, Space, TorusField, TorusGrid};

/// Refinement ratio |β(4M) − β(2M)| / |β(2M) − β(M)| at or above which the
/// sequence is declared divergent.
pub const CAUCHY_RATIO_THRESHOLD: f64 = 0.9;
/// Largest (sites × support) product the x-space solver accepts.
pub const XSPACE_WORK_LIMIT: usize = 40_000_000;

pub const ZERO_MODE_POLICY: &str =
    "k = 0 excluded from the dual-grid sum; C_1 in x-space has its k = 0 Fourier coefficient removed";

fn check_z(z: f64) -> Result<()> {
    if !(0.0..1.0).contains(&z) {
        return Err(LabError::invalid("z", "must satisfy 0 <= z < 1"));
    }
    Ok(())
}

fn check_s(s: u32) -> Result<()> {
    if s != 2 && s != 3 {
        return Err(LabError::invalid("s", "must be 2 or 3"));
    }
    Ok(())
}

/// Ĉ_z(k) = 1/(1 − z D̂_M(k)) on the dual grid.
pub fn greens_c(dist: &StepDistribution, grid: &TorusGrid, z: f64) -> Result<TorusField> {
    check_z(z)?;
    let dhat = dft(&fold_distribution(dist, grid)?.field)?;
    Ok(dhat.map(|v| Complex64::new(1.0 / (1.0 - z * v.re), 0.0)))
}

/// D^{∗n}(0) by n − 1 torus convolutions.
pub fn return_probability(dist: &StepDistribution, grid: &TorusGrid, n: u32) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let d = fold_distribution(dist, grid)?.field;
    let mut acc = d.clone();
    for _ in 1..n {
        acc = convolve(&acc, &d)?;
    }
    Ok(acc.values()[0].re)
}

/// (1/Mᵈ) Σ_k D̂(k)ⁿ.
pub fn return_probability_kspace(dist: &StepDistribution, grid: &TorusGrid, n: u32) -> Result<f64> {
    let dual = DualGrid::new(dist, grid.side())?;
    Ok(dual.mean(|p| p.dhat.powi(n as i32)))
}

/// (1/Mᵈ) Σ_{k≠0} D̂²/(1−D̂)^s.
pub fn beta_kspace(dual: &DualGrid, s: u32) -> f64 {
    dual.mean(|p| if p.is_zero() { 0.0 } else { beta_integrand(p, s) })
}

fn beta_integrand(p: &KPoint, s: u32) -> f64 {
    p.dhat * p.dhat / (1.0 - p.dhat).powi(s as i32)
}

/// Sparse x-space action of D on a periodic box.
struct SparseKernel {
    n: usize,
    width: usize,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseKernel {
    fn new(values: &[f64], grid: &TorusGrid) -> Result<Self> {
        let lat = grid.lattice();
        let n = values.len();
        let offsets: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        let width = offsets.len();
        if n.saturating_mul(width) > XSPACE_WORK_LIMIT {
            return Err(LabError::SizeGuard {
                what: "x-space kernel table".into(),
                size: n * width,
                limit: XSPACE_WORK_LIMIT,
            });
        }
        let mut neighbors = Vec::with_capacity(n * width);
        for x in 0..n {
            for &(y, _) in &offsets {
                neighbors.push(lat.sub(x, y) as u32);
            }
        }
        Ok(Self {
            n,
            width,
            neighbors,
            weights: offsets.into_iter().map(|(_, w)| w).collect(),
        })
    }

    /// out = f − D∗f.
    fn apply_laplacian(&self, f: &[f64], out: &mut [f64]) {
        for x in 0..self.n {
            let row = &self.neighbors[x * self.width..(x + 1) * self.width];
            let df: f64 = row.iter().zip(&self.weights).map(|(&j, &w)| w * f[j as usize]).sum();
            out[x] = f[x] - df;
        }
    }

    fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|x| {
                let row = &self.neighbors[x * self.width..(x + 1) * self.width];
                row.iter().zip(&self.weights).map(|(&j, &w)| w * f[j as usize]).sum()
            })
            .collect()
    }

    /// Conjugate gradient for (I − D)u = b on mean-zero functions.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut u = vec![0.0; n];
        let mut r = b.to_vec();
        let mean = r.iter().sum::<f64>() / n as f64;
        r.iter_mut().for_each(|v| *v -= mean);
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let bnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(u);
        }
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..20 * n.max(100) {
            self.apply_laplacian(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(LabError::Internal(
                    "x-space operator is not positive on mean-zero functions".into(),
                ));
            }
            let a = rr / pap;
            for i in 0..n {
                u[i] += a * p[i];
                r[i] -= a * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            if rr_new.sqrt() <= 1e-15 * bnorm {
                let m = u.iter().sum::<f64>() / n as f64;
                u.iter_mut().for_each(|v| *v -= m);
                return Ok(u);
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        Err(LabError::Internal("conjugate gradient did not converge".into()))
    }
}

/// β from the x-space forms (D∗C₁∗D∗C₁)(0) for s = 2 and
/// (C₁∗D∗C₁∗D∗C₁)(0) for s = 3, with the zero mode of C₁ removed. Solves the
/// lattice Poisson equation directly, without any Fourier transform.
pub fn beta_xspace(dist: &StepDistribution, grid: &TorusGrid, s: u32) -> Result<f64> {
    check_s(s)?;
    let folded = fold_distribution(dist, grid)?.field.real();
    let kernel = SparseKernel::new(&folded, grid)?;
    let n = grid.num_sites();
    let mut rhs = vec![-1.0 / n as f64; n];
    rhs[0] += 1.0;
    let c1 = kernel.solve(&rhs)?;
    let f = kernel.apply(&c1);
    // f is symmetric, so (f∗f)(0) = Σ f².
    let out = if s == 2 {
        f.iter().map(|v| v * v).sum()
    } else {
        let h = kernel.solve(&f)?;
        f.iter().zip(&h).map(|(a, b)| a * b).sum()
    };
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementPoint {
    #[serde(rename = "M")]
    pub m: usize,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// (α∧2)·s; β is finite on ℤᵈ exactly when d exceeds it.
    pub integrability: f64,
    /// 2(α∧2)·s, the dimension needed by the Cauchy–Schwarz route.
    pub cauchy_schwarz: f64,
    pub finite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub dist: DistSpec,
    pub s: u32,
    #[serde(rename = "M")]
    pub grid_m: usize,
    pub beta_kspace: f64,
    pub beta_xspace: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xspace_note: Option<String>,
    pub sup_d: f64,
    pub tail_mass: f64,
    pub zero_mode_policy: String,
    pub refinement: Vec<RefinementPoint>,
    pub cauchy_ratio: f64,
    pub divergent: bool,
    pub thresholds: Thresholds,
    pub warnings: Vec<String>,
}

impl BetaReport {
    /// The most refined value.
    pub fn best(&self) -> f64 {
        self.refinement.last().map_or(self.beta_kspace, |r| r.beta)
    }
}

pub fn thresholds(dist: &StepDistribution, s: u32) -> Thresholds {
    let t = dist.alpha_eff() * s as f64;
    Thresholds {
        integrability: t,
        cauchy_schwarz: 2.0 * t,
        finite: dist.dim() as f64 > t,
    }
}

/// β on the grid of side M plus the refinement sequence M, 2M, 4M.
pub fn beta(dist: &StepDistribution, grid: &TorusGrid, s: u32) -> Result<BetaReport> {
    check_s(s)?;
    if grid.dim() != dist.dim() {
        return Err(LabError::DimensionMismatch {
            expected: dist.dim(),
            got: grid.dim(),
        });
    }
    let m = grid.side();
    let refinement = [m, 2 * m, 4 * m]
        .into_iter()
        .map(|mm| {
            Ok(RefinementPoint {
                m: mm,
                beta: beta_kspace(&DualGrid::new(dist, mm)?, s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let beta_k = refinement[0].beta;
    let (beta_x, note) = match beta_xspace(dist, grid, s) {
        Ok(v) => (Some(v), None),
        Err(LabError::SizeGuard { size, limit, .. }) => {
            (None, Some(format!("x-space solve skipped: work {size} above {limit}")))
        }
        Err(e) => return Err(e),
    };
    let ratio = cauchy_ratio(&refinement);
    let divergent = !ratio.is_finite() || ratio >= CAUCHY_RATIO_THRESHOLD;
    let th = thresholds(dist, s);
    let mut warnings = Vec::new();
    if !th.finite {
        warnings.push(format!(
            "d = {} does not exceed (alpha ∧ 2)·s = {}; the infinite-lattice integral diverges",
            dist.dim(),
            th.integrability
        ));
    }
    if divergent != !th.finite {
        warnings.push("numerical refinement verdict disagrees with the integrability threshold".into());
    }
    Ok(BetaReport {
        dist: dist.spec(),
        s,
        grid_m: m,
        beta_kspace: beta_k,
        beta_xspace: beta_x,
        xspace_note: note,
        sup_d: dist.sup(),
        tail_mass: dist.tail_mass(),
        zero_mode_policy: ZERO_MODE_POLICY.into(),
        refinement,
        cauchy_ratio: ratio,
        divergent,
        thresholds: th,
        warnings,
    })
}

/// |β₃ − β₂| / |β₂ − β₁| over the last three refinement points.
pub fn cauchy_ratio(seq: &[RefinementPoint]) -> f64 {
    let n = seq.len();
    if n < 3 {
        return f64::NAN;
    }
    let a = (seq[n - 2].beta - seq[n - 3].beta).abs();
    let b = (seq[n - 1].beta - seq[n - 2].beta).abs();
    if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        b / a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    /// Nearest-neighbor walks across dimensions.
    Dimensions { dims: Vec<usize> },
    /// Uniform spread-out walks in fixed dimension across L.
    UniformRanges { d: usize, ls: Vec<u32> },
    /// Power-law walks in fixed dimension across L.
    PowerLawRanges { d: usize, alpha: f64, ls: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub param: f64,
    pub m_sequence: Vec<usize>,
    pub beta_sequence: Vec<f64>,
    pub beta: f64,
    /// d·β for the dimension sweep, Lᵈ·β for range sweeps.
    pub scaled: f64,
    pub divergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub s: u32,
    pub sweep: Sweep,
    pub rows: Vec<ScalingRow>,
    pub scaled_non_increasing: bool,
    pub max_over_min: f64,
    pub any_divergent: bool,
}

/// Base grid for a range-L walk: at least two support widths.
pub fn base_side_for_range(l: u32) -> usize {
    (2 * (2 * l as usize + 1)).next_power_of_two().max(8)
}

pub fn beta_scaling_table(sweep: &Sweep, s: u32) -> Result<ScalingTable> {
    check_s(s)?;
    let cases: Vec<(f64, StepDistribution, usize, f64)> = match sweep {
        Sweep::Dimensions { dims } => dims
            .iter()
            .map(|&d| Ok((d as f64, StepDistribution::nearest_neighbor(d)?, 8, d as f64)))
            .collect::<Result<_>>()?,
        Sweep::UniformRanges { d, ls } => ls
            .iter()
            .map(|&l| {
                Ok((
                    l as f64,
                    StepDistribution::uniform(*d, l)?,
                    base_side_for_range(l),
                    (l as f64).powi(*d as i32),
                ))
            })
            .collect::<Result<_>>()?,
        Sweep::PowerLawRanges { d, alpha, ls } => ls
            .iter()
            .map(|&l| {
                Ok((
                    l as f64,
                    StepDistribution::power_law(*d, l, *alpha)?,
                    base_side_for_range(l),
                    (l as f64).powi(*d as i32),
                ))
            })
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::new();
    for (param, dist, m, scale) in cases {
        let seq = [m, 2 * m, 4 * m]
            .into_iter()
            .map(|mm| {
                Ok(RefinementPoint {
                    m: mm,
                    beta: beta_kspace(&DualGrid::new(&dist, mm)?, s),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ratio = cauchy_ratio(&seq);
        let b = seq[2].beta;
        rows.push(ScalingRow {
            param,
            m_sequence: seq.iter().map(|r| r.m).collect(),
            beta_sequence: seq.iter().map(|r| r.beta).collect(),
            beta: b,
            scaled: scale * b,
            divergent: !ratio.is_finite() || ratio >= CAUCHY_RATIO_THRESHOLD,
        });
    }
    let scaled_non_increasing = rows.windows(2).all(|w| w[1].scaled <= w[0].scaled);
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.scaled), hi.max(r.scaled))
    });
    Ok(ScalingTable {
        s,
        sweep: sweep.clone(),
        any_divergent: rows.iter().any(|r| r.divergent),
        rows,
        scaled_non_increasing,
        max_over_min: hi / lo,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSplit {
    /// Contribution of 0 < ‖k‖∞ ≤ 1/L.
    pub inner: f64,
    /// Contribution of ‖k‖∞ > 1/L.
    pub outer: f64,
    /// min over the inner region of (1−D̂)/(L|k|)^{α∧2}.
    pub c1: f64,
    /// min over the outer region of 1−D̂.
    pub c2: f64,
    /// c₁^{-s} L^{-(α∧2)s} (1/Mᵈ) Σ_inner |k|^{-(α∧2)s}.
    pub inner_bound: f64,
    /// c₂^{-s} (1/Mᵈ) Σ_outer D̂².
    pub outer_bound: f64,
    /// c₂^{-s} Σ_x D_M(x)², which the outer bound never exceeds.
    pub outer_parseval_bound: f64,
    pub inner_scaled: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostics {
    pub dist: DistSpec,
    pub s: u32,
    #[serde(rename = "M")]
    pub grid_m: usize,
    pub beta: f64,
    /// (1/Mᵈ) Σ D̂⁴ = D^{∗4}(0).
    pub d4: f64,
    /// sqrt((1/Mᵈ) Σ_{k≠0} (1−D̂)^{-2s}).
    pub inverse_factor: f64,
    pub cauchy_schwarz_rhs: f64,
    pub cauchy_schwarz_holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_split: Option<RegionSplit>,
}

pub fn bound_diagnostics(dist: &StepDistribution, grid: &TorusGrid, s: u32) -> Result<BoundDiagnostics> {
    check_s(s)?;
    let dual = DualGrid::new(dist, grid.side())?;
    let beta = beta_kspace(&dual, s);
    let d4 = dual.mean(|p| p.dhat.powi(4));
    let inv = dual
        .mean(|p| {
            if p.is_zero() {
                0.0
            } else {
                (1.0 - p.dhat).powi(-2 * s as i32)
            }
        })
        .sqrt();
    let rhs = d4.sqrt() * inv;
    let region_split = (dist.family() != Family::NearestNeighbor).then(|| region_split(dist, &dual, s, beta));
    Ok(BoundDiagnostics {
        dist: dist.spec(),
        s,
        grid_m: grid.side(),
        beta,
        d4,
        inverse_factor: inv,
        cauchy_schwarz_rhs: rhs,
        cauchy_schwarz_holds: beta <= rhs * (1.0 + 1e-12),
        region_split,
    })
}

fn region_split(dist: &StepDistribution, dual: &DualGrid, s: u32, beta: f64) -> RegionSplit {
    let lf = dist.l() as f64;
    let a = dist.alpha_eff();
    let h = dual.spacing();
    let is_inner = move |p: &KPoint| !p.is_zero() && p.max_index as f64 * h <= 1.0 / lf + 1e-12;
    let is_outer = move |p: &KPoint| p.max_index as f64 * h > 1.0 / lf + 1e-12;
    let knorm = move |p: &KPoint| (p.sum_sq_index as f64).sqrt() * h;
    let inner = dual.mean(|p| if is_inner(p) { beta_integrand(p, s) } else { 0.0 });
    let outer = dual.mean(|p| if is_outer(p) { beta_integrand(p, s) } else { 0.0 });
    let c1 = dual.min(is_inner, |p| (1.0 - p.dhat) / (lf * knorm(p)).powf(a));
    let c2 = dual.min(is_outer, |p| 1.0 - p.dhat);
    let sum_inv = dual.mean(|p| if is_inner(p) { knorm(p).powf(-a * s as f64) } else { 0.0 });
    let inner_bound = c1.powi(-(s as i32)) * lf.powf(-a * s as f64) * sum_inv;
    let outer_sq = dual.mean(|p| if is_outer(p) { p.dhat * p.dhat } else { 0.0 });
    let all_sq = dual.mean(|p| p.dhat * p.dhat);
    let outer_bound = c2.powi(-(s as i32)) * outer_sq;
    let outer_parseval_bound = c2.powi(-(s as i32)) * all_sq;
    let tol = 1e-12;
    let holds = inner <= inner_bound * (1.0 + tol)
        && outer <= outer_bound * (1.0 + tol)
        && outer_bound <= outer_parseval_bound * (1.0 + tol)
        && ((inner + outer) - beta).abs() <= 1e-10 * beta.max(1e-300);
    RegionSplit {
        inner,
        outer,
        c1,
        c2,
        inner_bound,
        outer_bound,
        outer_parseval_bound,
        inner_scaled: inner * lf.powi(dist.dim() as i32),
        holds,
    }
}

/// x-space C_z(x) = (1/Mᵈ) Σ_k e^{-ik·x}/(1 − zD̂(k)).
pub fn greens_c_xspace(dist: &StepDistribution, grid: &TorusGrid, z: f64) -> Result<TorusField> {
    idft(&greens_c(dist, grid, z)?)
}

/// Ĉ_λ(k) for a symbol value.
pub fn c_hat(lambda: f64, dhat: f64) -> f64 {
    1.0 / (1.0 - lambda * dhat)
}

pub fn real_field(grid: &TorusGrid, space: Space, values: &[f64]) -> Result<TorusField> {
    TorusField::from_real(grid, space, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn green_function_special_values() {
        let g = TorusGrid::new(1, 8).unwrap();
        let nn = StepDistribution::nearest_neighbor(1).unwrap();
        let c0 = greens_c(&nn, &g, 0.0).unwrap();
        assert!(c0.values().iter().all(|v| (v.re - 1.0).abs() < 1e-15));
        let c = greens_c(&nn, &g, 0.5).unwrap();
        assert_relative_eq!(c.values()[0].re, 2.0, epsilon = 1e-14);
        assert_relative_eq!(c.get(&[4]).re, 2.0 / 3.0, epsilon = 1e-14);
        assert!(greens_c(&nn, &g, 1.0).is_err());
        assert!(greens_c(&nn, &g, -0.1).is_err());
    }

    #[test]
    fn return_probabilities_nn_line() {
        let g = TorusGrid::new(1, 16).unwrap();
        let nn = StepDistribution::nearest_neighbor(1).unwrap();
        assert_eq!(return_probability(&nn, &g, 0).unwrap(), 1.0);
        assert_relative_eq!(return_probability(&nn, &g, 2).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(return_probability(&nn, &g, 4).unwrap(), 0.375, epsilon = 1e-14);
    }

    #[test]
    fn beta_forms_agree_small() {
        let nn = StepDistribution::nearest_neighbor(3).unwrap();
        let g = TorusGrid::new(3, 8).unwrap();
        for s in [2, 3] {
            let k = beta_kspace(&DualGrid::new(&nn, 8).unwrap(), s);
            let x = beta_xspace(&nn, &g, s).unwrap();
            assert!((k - x).abs() < 1e-9, "s={s}: {k} vs {x}");
        }
    }

    #[test]
    fn nn_line_diverges() {
        let nn = StepDistribution::nearest_neighbor(1).unwrap();
        let r = beta(&nn, &TorusGrid::new(1, 16).unwrap(), 2).unwrap();
        assert!(r.divergent);
        assert!(!r.thresholds.finite);
    }

    #[test]
    fn rejects_bad_s() {
        let nn = StepDistribution::nearest_neighbor(5).unwrap();
        assert!(beta(&nn, &TorusGrid::new(5, 4).unwrap(), 4).is_err());
    }
}
