//! Step distributions D on ℤᵈ: nearest-neighbor, uniform spread-out, and
//! power-law spread-out, with Fourier evaluation and numerical checks of the
//! infrared/moment conditions.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Default target for the power-law truncation tail.
pub const DEFAULT_TAIL_TARGET: f64 = 1e-9;
/// Default cap on the number of enumerated power-law support points.
pub const DEFAULT_POINT_BUDGET: usize = 2_000_000;
/// Ratio of successive shell increments above which a moment is called divergent.
const DIVERGENCE_RATIO: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(alias = "nn")]
    NearestNeighbor,
    #[serde(alias = "uniform")]
    UniformSpreadOut,
    #[serde(alias = "power", alias = "powerlaw")]
    PowerLaw,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::NearestNeighbor => "nearest_neighbor",
            Family::UniformSpreadOut => "uniform_spread_out",
            Family::PowerLaw => "power_law",
        })
    }
}

/// Flat JSON description of a distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub family: Family,
    pub d: usize,
    #[serde(rename = "L", alias = "l", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Power-law support radius; chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

impl DistSpec {
    pub fn build(&self) -> Result<StepDistribution> {
        match self.family {
            Family::NearestNeighbor => StepDistribution::nearest_neighbor(self.d),
            Family::UniformSpreadOut => {
                let l = self
                    .l
                    .ok_or_else(|| LabError::invalid("L", "required for uniform_spread_out"))?;
                StepDistribution::uniform(self.d, l)
            }
            Family::PowerLaw => {
                let l = self.l.ok_or_else(|| LabError::invalid("L", "required for power_law"))?;
                let alpha = self
                    .alpha
                    .ok_or_else(|| LabError::invalid("alpha", "required for power_law"))?;
                match self.truncation {
                    Some(r) => StepDistribution::power_law_with_radius(self.d, l, alpha, r),
                    None => StepDistribution::power_law(self.d, l, alpha),
                }
            }
        }
    }
}

/// Explicit list of support points (origin excluded) and their probabilities.
#[derive(Clone, Debug)]
pub struct Support {
    d: usize,
    coords: Vec<i32>,
    weights: Vec<f64>,
}

impl Support {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[i32] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i32], f64)> + '_ {
        self.coords.chunks_exact(self.d).zip(self.weights.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug)]
pub struct StepDistribution {
    family: Family,
    d: usize,
    l: u32,
    alpha: Option<f64>,
    norm_const: f64,
    /// Power-law support radius (max-norm radius for the finite families).
    radius: f64,
    tail_mass: f64,
    support: OnceLock<Support>,
}

impl Clone for StepDistribution {
    fn clone(&self) -> Self {
        let support = OnceLock::new();
        if let Some(s) = self.support.get() {
            let _ = support.set(s.clone());
        }
        Self {
            family: self.family,
            d: self.d,
            l: self.l,
            alpha: self.alpha,
            norm_const: self.norm_const,
            radius: self.radius,
            tail_mass: self.tail_mass,
            support,
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(LabError::invalid("d", "dimension must be positive"));
    }
    if d > 64 {
        return Err(LabError::invalid("d", "dimension above 64 is not supported"));
    }
    Ok(())
}

/// Volume of the unit ball in ℝᵈ.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Calls `f` on every integer point of `[-r, r]^d` whose squared Euclidean
/// norm is at most `r2`.
fn for_each_in_ball(d: usize, r: i64, r2: i64, f: &mut impl FnMut(&[i32], i64)) {
    fn rec(j: usize, d: usize, r: i64, budget: i64, acc: i64, x: &mut Vec<i32>, f: &mut impl FnMut(&[i32], i64)) {
        if j == d {
            f(x, acc);
            return;
        }
        let rem = budget - acc;
        let lim = (rem as f64).sqrt().floor() as i64;
        let lim = lim.min(r);
        for c in -lim..=lim {
            if acc + c * c > budget {
                continue;
            }
            x[j] = c as i32;
            rec(j + 1, d, r, budget, acc + c * c, x, f);
        }
    }
    let mut x = vec![0i32; d];
    rec(0, d, r, r2, 0, &mut x, f);
}

fn count_in_ball(d: usize, r: i64) -> u64 {
    // Dynamic programming over squared radius.
    let r2 = (r * r) as usize;
    let mut ways = vec![0u64; r2 + 1];
    ways[0] = 1;
    for _ in 0..d {
        let mut next = vec![0u64; r2 + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for c in -r..=r {
                let t = s + (c * c) as usize;
                if t <= r2 {
                    next[t] += w;
                }
            }
        }
        ways = next;
    }
    ways.iter().sum()
}

impl StepDistribution {
    pub fn nearest_neighbor(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            family: Family::NearestNeighbor,
            d,
            l: 1,
            alpha: None,
            norm_const: (2 * d) as f64,
            radius: 1.0,
            tail_mass: 0.0,
            support: OnceLock::new(),
        })
    }

    pub fn uniform(d: usize, l: u32) -> Result<Self> {
        check_dim(d)?;
        if l == 0 {
            return Err(LabError::invalid("L", "spread-out parameter must be positive"));
        }
        let norm = (2.0 * l as f64 + 1.0).powi(d as i32) - 1.0;
        Ok(Self {
            family: Family::UniformSpreadOut,
            d,
            l,
            alpha: None,
            norm_const: norm,
            radius: l as f64,
            tail_mass: 0.0,
            support: OnceLock::new(),
        })
    }

    /// Power-law distribution with the support radius chosen to meet the tail
    /// target within the point budget.
    pub fn power_law(d: usize, l: u32, alpha: f64) -> Result<Self> {
        Self::validate_power(d, l, alpha)?;
        let r = Self::auto_radius(d, l, alpha, DEFAULT_TAIL_TARGET, DEFAULT_POINT_BUDGET);
        Self::power_law_with_radius(d, l, alpha, r)
    }

    pub fn power_law_with_radius(d: usize, l: u32, alpha: f64, radius: f64) -> Result<Self> {
        Self::validate_power(d, l, alpha)?;
        if !(radius.is_finite() && radius >= 1.0) {
            return Err(LabError::invalid("truncation", "support radius must be at least 1"));
        }
        let r = radius.floor() as i64;
        let r_eff = Self::effective_radius(d, r);
        let (dd, lf) = (d as f64, l as f64);
        let mut enumerated = 0.0;
        let inv_l2 = 1.0 / (lf * lf);
        let mut coords = Vec::new();
        let mut raw = Vec::new();
        for_each_in_ball(d, r, r * r, &mut |x, n2| {
            if n2 == 0 {
                return;
            }
            let w = power_h(n2 as f64 * inv_l2, dd, alpha);
            enumerated += w;
            coords.extend_from_slice(x);
            raw.push(w);
        });
        let tail_integral = power_tail_integral(d, lf, alpha, r_eff, 0.0);
        let norm = enumerated + tail_integral;
        let weights = raw.into_iter().map(|w| w / norm).collect();
        let support = OnceLock::new();
        let _ = support.set(Support { d, coords, weights });
        Ok(Self {
            family: Family::PowerLaw,
            d,
            l,
            alpha: Some(alpha),
            norm_const: norm,
            radius: r as f64,
            tail_mass: tail_integral / norm,
            support,
        })
    }

    fn validate_power(d: usize, l: u32, alpha: f64) -> Result<()> {
        check_dim(d)?;
        if l == 0 {
            return Err(LabError::invalid("L", "spread-out parameter must be positive"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(LabError::invalid("alpha", "decay exponent must be positive"));
        }
        Ok(())
    }

    /// Radius of the ball in ℝᵈ whose volume equals the number of lattice
    /// points with |y| ≤ r; for d = 1 this is r + 1/2.
    fn effective_radius(d: usize, r: i64) -> f64 {
        if d == 1 {
            return r as f64 + 0.5;
        }
        let n = count_in_ball(d, r) as f64;
        (n / unit_ball_volume(d)).powf(1.0 / d as f64)
    }

    fn auto_radius(d: usize, l: u32, alpha: f64, target: f64, budget: usize) -> f64 {
        let lf = l as f64;
        // The norm is at least the number of points with |y| ≤ L, at least 2d.
        let norm_lower = (2 * d) as f64;
        let s_d = d as f64 * unit_ball_volume(d);
        let r_target = (s_d * lf.powf(d as f64 + alpha) / (alpha * target * norm_lower)).powf(1.0 / alpha);
        let r_budget = (budget as f64 / unit_ball_volume(d)).powf(1.0 / d as f64);
        r_target.min(r_budget).max(lf + 1.0).floor()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Spread-out parameter; 1 for the nearest-neighbor family.
    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// min(α, 2), with α = ∞ for the finite-range families.
    pub fn alpha_eff(&self) -> f64 {
        self.alpha.map_or(2.0, |a| a.min(2.0))
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Largest Euclidean (power-law) or max-norm (uniform, NN) step length in
    /// the enumerated support.
    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn spec(&self) -> DistSpec {
        DistSpec {
            family: self.family,
            d: self.d,
            l: (self.family != Family::NearestNeighbor).then_some(self.l),
            alpha: self.alpha,
            truncation: (self.family == Family::PowerLaw).then_some(self.radius),
        }
    }

    /// ‖D‖∞.
    pub fn sup(&self) -> f64 {
        1.0 / self.norm_const
    }

    pub fn is_separable(&self) -> bool {
        self.family != Family::PowerLaw
    }

    fn eval_unchecked(&self, x: &[i64]) -> f64 {
        if x.iter().all(|&c| c == 0) {
            return 0.0;
        }
        match self.family {
            Family::NearestNeighbor => {
                let l1: i64 = x.iter().map(|c| c.abs()).sum();
                if l1 == 1 {
                    1.0 / self.norm_const
                } else {
                    0.0
                }
            }
            Family::UniformSpreadOut => {
                let linf = x.iter().map(|c| c.abs()).max().unwrap_or(0);
                if linf <= self.l as i64 {
                    1.0 / self.norm_const
                } else {
                    0.0
                }
            }
            Family::PowerLaw => {
                let lf = self.l as f64;
                let n2: f64 = x.iter().map(|&c| (c as f64) * (c as f64)).sum();
                power_h(n2 / (lf * lf), self.d as f64, self.alpha.unwrap_or(1.0)) / self.norm_const
            }
        }
    }

    /// D(x).
    pub fn eval(&self, x: &[i64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(LabError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// The enumerated support (origin excluded). Built lazily for the finite
    /// families.
    pub fn support(&self) -> &Support {
        self.support.get_or_init(|| {
            let d = self.d;
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            let w = 1.0 / self.norm_const;
            match self.family {
                Family::NearestNeighbor => {
                    for j in 0..d {
                        for s in [1i32, -1] {
                            let mut x = vec![0i32; d];
                            x[j] = s;
                            coords.extend_from_slice(&x);
                            weights.push(w);
                        }
                    }
                }
                Family::UniformSpreadOut => {
                    let l = self.l as i32;
                    let side = (2 * l + 1) as usize;
                    let total = side.pow(d as u32);
                    let mut x = vec![0i32; d];
                    for idx in 0..total {
                        let mut t = idx;
                        for c in x.iter_mut().rev() {
                            *c = (t % side) as i32 - l;
                            t /= side;
                        }
                        if x.iter().all(|&c| c == 0) {
                            continue;
                        }
                        coords.extend_from_slice(&x);
                        weights.push(w);
                    }
                }
                Family::PowerLaw => unreachable!("power-law support is built eagerly"),
            }
            Support { d, coords, weights }
        })
    }

    /// D̂(k) = Σ_x D(x) cos(k·x).
    ///
    /// Closed forms for the finite families. For the power law the enumerated
    /// support is summed and the truncated tail mass is added at k = 0 only,
    /// matching the torus fold, which spreads the tail uniformly over sites.
    pub fn fourier(&self, k: &[f64]) -> Result<f64> {
        if k.len() != self.d {
            return Err(LabError::DimensionMismatch {
                expected: self.d,
                got: k.len(),
            });
        }
        Ok(match self.family {
            Family::NearestNeighbor => nn_symbol(k),
            Family::UniformSpreadOut => {
                let prod: f64 = k.iter().map(|&t| dirichlet(self.l, t)).product();
                (prod - 1.0) / self.norm_const
            }
            Family::PowerLaw => {
                let mut v = self.fourier_support_sum(k);
                if k.iter().all(|&t| t == 0.0) {
                    v += self.tail_mass;
                }
                v
            }
        })
    }

    /// Σ over the enumerated support of D(x) cos(k·x), without closed forms.
    pub fn fourier_support_sum(&self, k: &[f64]) -> f64 {
        let s = self.support();
        let d = self.d;
        let chunk = 1 << 14;
        if s.len() <= chunk {
            return s.iter().map(|(x, w)| w * phase_cos(k, x)).sum();
        }
        let parts: Vec<f64> = s
            .coords
            .par_chunks(chunk * d)
            .zip(s.weights.par_chunks(chunk))
            .map(|(cs, ws)| {
                cs.chunks_exact(d)
                    .zip(ws)
                    .map(|(x, &w)| w * phase_cos(k, x))
                    .sum::<f64>()
            })
            .collect();
        parts.into_iter().sum()
    }
}

fn phase_cos(k: &[f64], x: &[i32]) -> f64 {
    let dot: f64 = k.iter().zip(x).map(|(&a, &b)| a * b as f64).sum();
    dot.cos()
}

/// (1/d) Σ cos k_j.
pub fn nn_symbol(k: &[f64]) -> f64 {
    k.iter().map(|t| t.cos()).sum::<f64>() / k.len() as f64
}

/// Σ_{|a| ≤ L} cos(a t).
pub fn dirichlet(l: u32, t: f64) -> f64 {
    1.0 + 2.0 * (1..=l).map(|a| (a as f64 * t).cos()).sum::<f64>()
}

/// h(y) = (|y| ∨ 1)^{-d-α}, taking |y|² as input.
fn power_h(norm_sq: f64, d: f64, alpha: f64) -> f64 {
    if norm_sq <= 1.0 {
        1.0
    } else {
        norm_sq.powf(-(d + alpha) / 2.0)
    }
}

/// ∫_{|y|>r} |y|^κ h(y/L) dy for r ≥ L (unnormalized), infinite if κ ≥ α.
fn power_tail_integral(d: usize, l: f64, alpha: f64, r: f64, kappa: f64) -> f64 {
    if kappa >= alpha {
        return f64::INFINITY;
    }
    let s_d = d as f64 * unit_ball_volume(d);
    let r = r.max(l);
    s_d * l.powf(d as f64 + alpha) * r.powf(kappa - alpha) / (alpha - kappa)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MomentValue {
    Finite { value: f64, tail_bound: f64 },
    Divergent { partial_sum: f64, shell_ratio: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub kappa: f64,
    #[serde(flatten)]
    pub value: MomentValue,
}

impl MomentEntry {
    pub fn is_divergent(&self) -> bool {
        matches!(self.value, MomentValue::Divergent { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionViolation {
    pub condition: String,
    pub k: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub dist: DistSpec,
    pub grid_res: usize,
    pub eps: f64,
    /// Exponent α∧2 used for the small-k bound.
    pub exponent: f64,
    pub c1_hat: f64,
    pub c1_witness: Vec<f64>,
    /// min of 1 − D̂ over the outer region.
    pub outer_min: f64,
    pub outer_witness: Vec<f64>,
    /// min of 1 + D̂ over the whole grid.
    pub upper_gap: f64,
    pub upper_witness: Vec<f64>,
    pub c2_hat: f64,
    pub sup_d: f64,
    /// ‖D‖∞ · Lᵈ.
    pub sup_d_scaled: f64,
    pub tail_mass: f64,
    pub moment_table: Vec<MomentEntry>,
    /// For the nearest-neighbor family: 1 − D̂(k) ≥ (2/π²)|k|²/d at every grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn_quadratic_bound_holds: Option<bool>,
    pub violations: Vec<ConditionViolation>,
    pub passed: bool,
}

/// Non-decreasing index tuples in `0..=top` of length d (one per orbit of the
/// coordinate permutation group).
fn for_each_sorted_tuple(d: usize, top: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(j: usize, lo: usize, top: usize, t: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if j == t.len() {
            f(t);
            return;
        }
        for v in lo..=top {
            t[j] = v;
            rec(j + 1, v, top, t, f);
        }
    }
    let mut t = vec![0; d];
    rec(0, 0, top, &mut t, f);
}

/// Scans the dual grid and estimates the constants of the infrared and
/// moment conditions.
pub fn verify_conditions(dist: &StepDistribution, grid_res: usize, eps: f64) -> Result<ConditionReport> {
    if grid_res < 4 {
        return Err(LabError::invalid("grid_res", "must be at least 4"));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(LabError::invalid("eps", "must be positive"));
    }
    let d = dist.dim();
    let lf = dist.l() as f64;
    let a = dist.alpha_eff();
    let half = grid_res / 2;

    // Outer scan: every point 2πm/res of the nonnegative orthant, by symmetry.
    let mut outer_pts = Vec::new();
    for_each_sorted_tuple(d, half, &mut |t| {
        if t.iter().any(|&m| m != 0) {
            outer_pts.push(
                t.iter()
                    .map(|&m| 2.0 * PI * m as f64 / grid_res as f64)
                    .collect::<Vec<_>>(),
            );
        }
    });
    // Inner scan: ‖k‖∞ ≤ 1/L on a grid of the same resolution.
    let mut inner_pts = Vec::new();
    for_each_sorted_tuple(d, half, &mut |t| {
        if t.iter().any(|&m| m != 0) {
            inner_pts.push(t.iter().map(|&m| m as f64 / (half as f64 * lf)).collect::<Vec<_>>());
        }
    });

    let eval = |k: &Vec<f64>| dist.fourier(k).map(|v| 1.0 - v);
    let outer_vals: Vec<f64> = outer_pts.par_iter().map(eval).collect::<Result<_>>()?;
    let inner_vals: Vec<f64> = inner_pts.par_iter().map(eval).collect::<Result<_>>()?;

    let mut violations = Vec::new();
    let mut c1 = f64::INFINITY;
    let mut c1_w = Vec::new();
    let mut outer_min = f64::INFINITY;
    let mut outer_w = Vec::new();
    let mut upper_gap = f64::INFINITY;
    let mut upper_w = Vec::new();
    let mut nn_ok = true;

    let norm = |k: &[f64]| k.iter().map(|t| t * t).sum::<f64>().sqrt();
    let linf = |k: &[f64]| k.iter().fold(0.0f64, |m, t| m.max(t.abs()));

    for (k, &v) in inner_pts.iter().zip(&inner_vals) {
        let ratio = v / (lf * norm(k)).powf(a);
        if ratio < c1 {
            c1 = ratio;
            c1_w = k.clone();
        }
        if v <= 0.0 {
            violations.push(ConditionViolation {
                condition: "small_k_lower_bound".into(),
                k: k.clone(),
                value: v,
            });
        }
        if 2.0 - v < upper_gap {
            upper_gap = 2.0 - v;
            upper_w = k.clone();
        }
    }
    for (k, &v) in outer_pts.iter().zip(&outer_vals) {
        if linf(k) >= 1.0 / lf - 1e-12 && v < outer_min {
            outer_min = v;
            outer_w = k.clone();
        }
        if 2.0 - v < upper_gap {
            upper_gap = 2.0 - v;
            upper_w = k.clone();
        }
        if v <= 0.0 {
            violations.push(ConditionViolation {
                condition: "positivity".into(),
                k: k.clone(),
                value: v,
            });
        }
        if dist.family() == Family::NearestNeighbor {
            let q = 2.0 / (PI * PI) * norm(k).powi(2) / d as f64;
            if v < q - 1e-14 {
                nn_ok = false;
            }
        }
    }
    if outer_min <= 0.0 {
        violations.push(ConditionViolation {
            condition: "large_k_gap".into(),
            k: outer_w.clone(),
            value: outer_min,
        });
    }
    if upper_gap <= 0.0 {
        violations.push(ConditionViolation {
            condition: "upper_gap".into(),
            k: upper_w.clone(),
            value: upper_gap,
        });
    }
    if c1 <= 0.0 {
        violations.push(ConditionViolation {
            condition: "small_k_constant".into(),
            k: c1_w.clone(),
            value: c1,
        });
    }
    let c2 = outer_min.min(upper_gap);
    let moment_table = moment_table(dist, eps);
    let passed = violations.is_empty() && c1 > 0.0 && c2 > 0.0;
    Ok(ConditionReport {
        dist: dist.spec(),
        grid_res,
        eps,
        exponent: a,
        c1_hat: c1,
        c1_witness: c1_w,
        outer_min,
        outer_witness: outer_w,
        upper_gap,
        upper_witness: upper_w,
        c2_hat: c2,
        sup_d: dist.sup(),
        sup_d_scaled: dist.sup() * lf.powi(d as i32),
        tail_mass: dist.tail_mass(),
        moment_table,
        nn_quadratic_bound_holds: (dist.family() == Family::NearestNeighbor).then_some(nn_ok),
        violations,
        passed,
    })
}

/// Σ|x|^κ D(x) at κ ∈ {2, 2+ε} and, for the power law, also κ ∈ {α−ε, α}.
pub fn moment_table(dist: &StepDistribution, eps: f64) -> Vec<MomentEntry> {
    let mut kappas = vec![2.0, 2.0 + eps];
    if let Some(alpha) = dist.alpha() {
        kappas.push(alpha - eps);
        kappas.push(alpha);
    }
    kappas
        .into_iter()
        .filter(|&k| k > 0.0)
        .map(|kappa| MomentEntry {
            kappa,
            value: moment(dist, kappa),
        })
        .collect()
}

fn moment(dist: &StepDistribution, kappa: f64) -> MomentValue {
    let s = dist.support();
    if dist.family() != Family::PowerLaw {
        let value = s
            .iter()
            .map(|(x, w)| {
                let n2: f64 = x.iter().map(|&c| (c as f64) * (c as f64)).sum();
                w * n2.powf(kappa / 2.0)
            })
            .sum();
        return MomentValue::Finite { value, tail_bound: 0.0 };
    }
    let alpha = dist.alpha().unwrap_or(f64::INFINITY);
    let r = dist.support_radius();
    // Partial sums over the balls of radius R/4, R/2, R.
    let (r1, r2) = ((r / 4.0).powi(2), (r / 2.0).powi(2));
    let mut sums = [0.0f64; 3];
    for (x, w) in s.iter() {
        let n2: f64 = x.iter().map(|&c| (c as f64) * (c as f64)).sum();
        let t = w * n2.powf(kappa / 2.0);
        if n2 <= r1 {
            sums[0] += t;
        }
        if n2 <= r2 {
            sums[1] += t;
        }
        sums[2] += t;
    }
    let inc1 = sums[1] - sums[0];
    let inc2 = sums[2] - sums[1];
    let ratio = if inc1 > 0.0 { inc2 / inc1 } else { 0.0 };
    if ratio >= DIVERGENCE_RATIO || kappa >= alpha {
        return MomentValue::Divergent {
            partial_sum: sums[2],
            shell_ratio: ratio,
        };
    }
    let r_eff = StepDistribution::effective_radius(dist.dim(), r as i64);
    let tail = power_tail_integral(dist.dim(), dist.l() as f64, alpha, r_eff, kappa) / dist.norm_const();
    MomentValue::Finite {
        value: sums[2] + tail,
        tail_bound: tail,
    }
}

/// Coupling table J(x) on ℤᵈ (finite support).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub d: usize,
    pub entries: Vec<(Vec<i64>, f64)>,
}

impl CouplingTable {
    pub fn new(d: usize, entries: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        check_dim(d)?;
        for (x, j) in &entries {
            if x.len() != d {
                return Err(LabError::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            if !(j.is_finite() && *j >= 0.0) {
                return Err(LabError::invalid("J", "couplings must be finite and nonnegative"));
            }
        }
        Ok(Self { d, entries })
    }

    /// Symmetric couplings `J(±e_1 r) = j_r` in every coordinate direction and
    /// sign, for the listed ranges.
    pub fn axial(d: usize, ranges: &[(i64, f64)]) -> Result<Self> {
        let mut entries = Vec::new();
        for &(r, j) in ranges {
            for a in 0..d {
                for s in [1, -1] {
                    let mut x = vec![0i64; d];
                    x[a] = s * r;
                    entries.push((x, j));
                }
            }
        }
        Self::new(d, entries)
    }

    /// J = D scaled by `strength`, over the enumerated support.
    pub fn from_distribution(dist: &StepDistribution, strength: f64) -> Result<Self> {
        let entries = dist
            .support()
            .iter()
            .map(|(x, w)| (x.iter().map(|&c| c as i64).collect(), strength * w))
            .collect();
        Self::new(dist.dim(), entries)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, j)| j).sum()
    }
}

/// τ(z) = Σ_y tanh(zJ(y)) and D(x) = tanh(zJ(x))/τ(z).
pub fn ising_tau(couplings: &CouplingTable, z: f64) -> Result<(f64, CouplingTable)> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(LabError::invalid("z", "inverse temperature must be nonnegative"));
    }
    let tau: f64 = couplings.entries.iter().map(|(_, j)| (z * j).tanh()).sum();
    if tau <= 0.0 {
        return Err(LabError::UndefinedNormalization);
    }
    let entries = couplings
        .entries
        .iter()
        .map(|(x, j)| (x.clone(), (z * j).tanh() / tau))
        .collect();
    Ok((
        tau,
        CouplingTable {
            d: couplings.d,
            entries,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nn_values() {
        let d = StepDistribution::nearest_neighbor(2).unwrap();
        assert_eq!(d.eval(&[1, 0]).unwrap(), 0.25);
        assert_eq!(d.eval(&[0, 0]).unwrap(), 0.0);
        assert_eq!(d.eval(&[1, 1]).unwrap(), 0.0);
        assert!(matches!(
            d.eval(&[1]),
            Err(LabError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn uniform_values() {
        let d = StepDistribution::uniform(1, 2).unwrap();
        assert_eq!(d.eval(&[1]).unwrap(), 0.25);
        assert_eq!(d.eval(&[-2]).unwrap(), 0.25);
        assert_eq!(d.eval(&[3]).unwrap(), 0.0);
        assert_relative_eq!(d.support().total(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn nn_fourier_special_points() {
        let d = StepDistribution::nearest_neighbor(2).unwrap();
        assert_eq!(d.fourier(&[0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(d.fourier(&[PI, PI]).unwrap(), -1.0, epsilon = 1e-15);
        assert!(d.fourier(&[PI / 2.0, PI / 2.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn uniform_closed_form_matches_support_sum() {
        let d = StepDistribution::uniform(2, 3).unwrap();
        for k in [[0.3, -1.2], [PI, 0.1], [2.0, 2.5]] {
            assert_relative_eq!(d.fourier(&k).unwrap(), d.fourier_support_sum(&k), epsilon = 1e-14);
        }
    }

    #[test]
    fn ball_count_matches_enumeration() {
        for d in 1..=3 {
            for r in 1..=5 {
                let mut n = 0u64;
                for_each_in_ball(d, r, r * r, &mut |_, _| n += 1);
                assert_eq!(n, count_in_ball(d, r));
            }
        }
    }

    #[test]
    fn power_law_normalized_with_small_tail() {
        let d = StepDistribution::power_law(1, 1, 2.0).unwrap();
        assert!(d.tail_mass() < 1e-9, "tail {}", d.tail_mass());
        assert_relative_eq!(d.support().total() + d.tail_mass(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.fourier(&[0.0]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(2), PI, epsilon = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-15);
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn tau_rejects_zero_couplings() {
        let j = CouplingTable::axial(1, &[(1, 1.0)]).unwrap();
        assert_eq!(ising_tau(&j, 0.0).unwrap_err(), LabError::UndefinedNormalization);
        let (tau, dd) = ising_tau(&j, 1.0).unwrap();
        assert_relative_eq!(tau, 2.0 * 1f64.tanh());
        assert!(dd.entries.iter().all(|(_, w)| (*w - 0.5).abs() < 1e-15));
    }

    #[test]
    fn spec_round_trip() {
        let s: DistSpec = serde_json::from_str(r#"{"family":"uniform","d":3,"L":2}"#).unwrap();
        let dist = s.build().unwrap();
        assert_eq!(dist.spec(), s);
        let bad: std::result::Result<DistSpec, _> = serde_json::from_str(r#"{"family":"x","d":3}"#);
        assert!(bad.is_err());
    }
}
