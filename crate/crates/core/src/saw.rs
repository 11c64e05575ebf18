//! Exact self-avoiding-walk enumeration with D-weights, truncated series for
//! the two-point function and susceptibility, and extraction of the lace
//! coefficients π_m from the convolution recursion
//! c_{n+1} = D∗c_n + Σ_{m=2}^{n+1} π_m ∗ c_{n+1−m}.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::step_dist::{DistSpec, Family, StepDistribution};

/// Largest number of distinct steps the enumerator accepts.
pub const MAX_BRANCHING: usize = 50;

/// Fraction of the z_c estimate beyond which χ(z) is flagged as unreliable.
const RELIABLE_FRACTION: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Integer numerators over a common denominator bⁿ.
    Rational,
    Double,
}

/// Default length budget: 14 in one dimension, 10 in two, 8 above.
pub fn default_budget(d: usize) -> usize {
    match d {
        1 => 14,
        2 => 10,
        _ => 8,
    }
}

#[derive(Clone, Debug)]
pub struct EnumConfig {
    pub n_max: usize,
    /// Euclidean radius cutoff on steps; all steps kept when `None` (finite
    /// families) or the largest radius with at most 50 steps (power law).
    pub support_radius: Option<f64>,
    pub mode: Mode,
    pub budget: usize,
}

impl EnumConfig {
    pub fn new(d: usize, n_max: usize, mode: Mode) -> Self {
        Self {
            n_max,
            support_radius: None,
            mode,
            budget: default_budget(d),
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }
}

type Point = Vec<i64>;
type SparseMap<T> = BTreeMap<Point, T>;

/// Coefficient arithmetic shared by the exact and floating paths.
trait Coef: Copy + Send + Sync + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn add(self, o: Self) -> Result<Self>;
    fn sub(self, o: Self) -> Result<Self>;
    fn mul(self, o: Self) -> Result<Self>;
}

impl Coef for i128 {
    fn zero() -> Self {
        0
    }
    fn add(self, o: Self) -> Result<Self> {
        self.checked_add(o).ok_or_else(overflow)
    }
    fn sub(self, o: Self) -> Result<Self> {
        self.checked_sub(o).ok_or_else(overflow)
    }
    fn mul(self, o: Self) -> Result<Self> {
        self.checked_mul(o).ok_or_else(overflow)
    }
}

impl Coef for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Result<Self> {
        Ok(self + o)
    }
    fn sub(self, o: Self) -> Result<Self> {
        Ok(self - o)
    }
    fn mul(self, o: Self) -> Result<Self> {
        Ok(self * o)
    }
}

fn overflow() -> LabError {
    LabError::Internal("exact coefficient overflowed i128".into())
}

#[derive(Clone, Debug, PartialEq)]
enum Levels {
    /// Numerators; level n has denominator baseⁿ.
    Exact(Vec<SparseMap<i128>>),
    Float(Vec<SparseMap<f64>>),
}

#[derive(Clone, Debug)]
pub struct WalkSeries {
    d: usize,
    n_max: usize,
    mode: Mode,
    dist: DistSpec,
    /// Common step denominator in rational mode.
    base: u64,
    steps: Vec<(Point, f64)>,
    /// 1 − Σ of the kept step weights.
    weight_loss: f64,
    levels: Levels,
}

fn select_steps(dist: &StepDistribution, radius: Option<f64>) -> Result<Vec<(Point, f64)>> {
    let s = dist.support();
    let mut all: Vec<(Point, f64, i64)> = s
        .iter()
        .map(|(x, w)| {
            let p: Point = x.iter().map(|&c| c as i64).collect();
            let n2 = p.iter().map(|c| c * c).sum();
            (p, w, n2)
        })
        .collect();
    all.sort_by(|a, b| a.2.cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
    let kept: Vec<(Point, f64)> = match radius {
        Some(r) => {
            if !(r.is_finite() && r >= 1.0) {
                return Err(LabError::invalid("support_radius", "must be at least 1"));
            }
            let r2 = (r * r).floor() as i64;
            all.into_iter().filter(|t| t.2 <= r2).map(|t| (t.0, t.1)).collect()
        }
        None if dist.family() == Family::PowerLaw => {
            // Whole shells only, as many as fit in the branching cap.
            let mut out = Vec::new();
            let mut i = 0;
            while i < all.len() {
                let mut j = i;
                while j < all.len() && all[j].2 == all[i].2 {
                    j += 1;
                }
                if out.len() + (j - i) > MAX_BRANCHING {
                    break;
                }
                out.extend(all[i..j].iter().map(|t| (t.0.clone(), t.1)));
                i = j;
            }
            out
        }
        None => all.into_iter().map(|t| (t.0, t.1)).collect(),
    };
    if kept.len() > MAX_BRANCHING {
        return Err(LabError::invalid(
            "support_radius",
            format!("{} steps exceed the branching cap {MAX_BRANCHING}", kept.len()),
        ));
    }
    if kept.is_empty() {
        return Err(LabError::invalid("support_radius", "no steps left after truncation"));
    }
    Ok(kept)
}

fn dfs<T: Coef>(
    steps: &[(Point, T)],
    n_max: usize,
    path: &mut Vec<Point>,
    weight: T,
    out: &mut [SparseMap<T>],
) -> Result<()> {
    let n = path.len() - 1;
    let here = path[n].clone();
    let slot = out[n].entry(here.clone()).or_insert_with(T::zero);
    *slot = slot.add(weight)?;
    if n == n_max {
        return Ok(());
    }
    for (s, w) in steps {
        let next: Point = here.iter().zip(s).map(|(a, b)| a + b).collect();
        if path.contains(&next) {
            continue;
        }
        path.push(next);
        dfs(steps, n_max, path, weight.mul(*w)?, out)?;
        path.pop();
    }
    Ok(())
}

fn enumerate_with<T: Coef>(d: usize, steps: &[(Point, T)], n_max: usize, one: T) -> Result<Vec<SparseMap<T>>> {
    let mut levels: Vec<SparseMap<T>> = vec![SparseMap::new(); n_max + 1];
    levels[0].insert(vec![0; d], one);
    if n_max == 0 {
        return Ok(levels);
    }
    let parts: Vec<Result<Vec<SparseMap<T>>>> = steps
        .par_iter()
        .map(|(s, w)| {
            let mut out = vec![SparseMap::new(); n_max + 1];
            let mut path = vec![vec![0; d], s.clone()];
            dfs(steps, n_max, &mut path, *w, &mut out)?;
            Ok(out)
        })
        .collect();
    for part in parts {
        for (n, map) in part?.into_iter().enumerate() {
            for (x, v) in map {
                let slot = levels[n].entry(x).or_insert_with(T::zero);
                *slot = slot.add(v)?;
            }
        }
    }
    Ok(levels)
}

/// Exact c_n(x) for n ≤ n_max by depth-first enumeration.
pub fn enumerate(dist: &StepDistribution, config: &EnumConfig) -> Result<WalkSeries> {
    if config.n_max > config.budget {
        return Err(LabError::BudgetExceeded {
            requested: config.n_max,
            budget: config.budget,
        });
    }
    let steps = select_steps(dist, config.support_radius)?;
    let d = dist.dim();
    let kept: f64 = steps.iter().map(|s| s.1).sum();
    let weight_loss = (1.0 - kept).max(0.0);
    let (levels, base) = match config.mode {
        Mode::Rational => {
            if dist.family() == Family::PowerLaw {
                return Err(LabError::invalid("mode", "rational mode needs equal step weights"));
            }
            let base = dist.norm_const().round() as u64;
            let unit: Vec<(Point, i128)> = steps.iter().map(|(p, _)| (p.clone(), 1)).collect();
            (Levels::Exact(enumerate_with(d, &unit, config.n_max, 1i128)?), base)
        }
        Mode::Double => (Levels::Float(enumerate_with(d, &steps, config.n_max, 1.0f64)?), 0),
    };
    Ok(WalkSeries {
        d,
        n_max: config.n_max,
        mode: config.mode,
        dist: dist.spec(),
        base,
        steps,
        weight_loss,
        levels,
    })
}

/// Independent walk counter: number of self-avoiding n-step walks with the
/// given step set, by brute-force extension of every walk (no weights, no
/// symmetry, no parallelism).
pub fn count_walks_bruteforce(steps: &[Vec<i64>], n: usize) -> u64 {
    let d = steps.first().map_or(0, |s| s.len());
    let mut walks: Vec<Vec<Vec<i64>>> = vec![vec![vec![0; d]]];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &walks {
            let last = w.last().unwrap();
            for s in steps {
                let p: Vec<i64> = last.iter().zip(s).map(|(a, b)| a + b).collect();
                if !w.contains(&p) {
                    let mut e = w.clone();
                    e.push(p);
                    next.push(e);
                }
            }
        }
        walks = next;
    }
    walks.len() as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelView {
    pub n: usize,
    pub points: Vec<(Vec<i64>, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerators: Option<Vec<(Vec<i64>, String)>>,
}

impl WalkSeries {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dist(&self) -> &DistSpec {
        &self.dist
    }

    pub fn weight_loss(&self) -> f64 {
        self.weight_loss
    }

    pub fn branching(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> Vec<Vec<i64>> {
        self.steps.iter().map(|s| s.0.clone()).collect()
    }

    /// Common denominator of level n in rational mode.
    pub fn denominator(&self, n: usize) -> Option<i128> {
        (self.mode == Mode::Rational).then(|| (self.base as i128).pow(n as u32))
    }

    fn scale(&self, n: usize) -> f64 {
        match self.mode {
            Mode::Rational => (self.base as f64).powi(-(n as i32)),
            Mode::Double => 1.0,
        }
    }

    /// c_n(x).
    pub fn value(&self, n: usize, x: &[i64]) -> f64 {
        match &self.levels {
            Levels::Exact(l) => l[n].get(x).map_or(0.0, |&v| v as f64 * self.scale(n)),
            Levels::Float(l) => l[n].get(x).copied().unwrap_or(0.0),
        }
    }

    /// Exact numerator of c_n(x) over `denominator(n)`.
    pub fn numerator(&self, n: usize, x: &[i64]) -> Option<i128> {
        match &self.levels {
            Levels::Exact(l) => Some(l[n].get(x).copied().unwrap_or(0)),
            Levels::Float(_) => None,
        }
    }

    /// Σ_x c_n(x).
    pub fn total(&self, n: usize) -> f64 {
        match &self.levels {
            Levels::Exact(l) => l[n].values().sum::<i128>() as f64 * self.scale(n),
            Levels::Float(l) => l[n].values().sum(),
        }
    }

    /// Number of walks of length n, i.e. bⁿ Σ_x c_n(x), in rational mode.
    pub fn walk_count(&self, n: usize) -> Option<i128> {
        match &self.levels {
            Levels::Exact(l) => Some(l[n].values().sum()),
            Levels::Float(_) => None,
        }
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..=self.n_max).map(|n| self.total(n)).collect()
    }

    /// c_n as a sorted list of (x, value).
    pub fn level(&self, n: usize) -> Vec<(Vec<i64>, f64)> {
        match &self.levels {
            Levels::Exact(l) => l[n]
                .iter()
                .map(|(x, &v)| (x.clone(), v as f64 * self.scale(n)))
                .collect(),
            Levels::Float(l) => l[n].iter().map(|(x, &v)| (x.clone(), v)).collect(),
        }
    }

    pub fn levels_view(&self) -> Vec<LevelView> {
        (0..=self.n_max)
            .map(|n| {
                let numerators = match &self.levels {
                    Levels::Exact(l) => Some(l[n].iter().map(|(x, v)| (x.clone(), v.to_string())).collect()),
                    Levels::Float(_) => None,
                };
                LevelView {
                    n,
                    points: self.level(n),
                    denominator: self.denominator(n).map(|v| v.to_string()),
                    numerators,
                }
            })
            .collect()
    }

    /// Ĝ_z(k) = Σ_n ĉ_n(k) zⁿ from the truncated series.
    pub fn g_hat(&self, z: f64, k: &[f64]) -> f64 {
        (0..=self.n_max)
            .map(|n| {
                let c: f64 = self
                    .level(n)
                    .iter()
                    .map(|(x, v)| v * x.iter().zip(k).map(|(&a, b)| a as f64 * b).sum::<f64>().cos())
                    .sum();
                c * z.powi(n as i32)
            })
            .sum()
    }

    /// D̂(k) restricted to the enumerated step set.
    pub fn step_symbol(&self, k: &[f64]) -> f64 {
        self.steps
            .iter()
            .map(|(x, w)| w * x.iter().zip(k).map(|(&a, b)| a as f64 * b).sum::<f64>().cos())
            .sum()
    }

    /// G_z(x) = Σ_n c_n(x) zⁿ.
    pub fn two_point(&self, z: f64) -> BTreeMap<Vec<i64>, f64> {
        let mut g = BTreeMap::new();
        for n in 0..=self.n_max {
            let zn = z.powi(n as i32);
            for (x, v) in self.level(n) {
                *g.entry(x).or_insert(0.0) += v * zn;
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZcEstimate {
    pub estimate: f64,
    /// The last three ratio iterates a_{n−1}/a_n.
    pub last_ratios: Vec<f64>,
    pub aitken: Option<f64>,
}

/// Ratio-method estimate of the convergence radius of Σ aₙ zⁿ.
pub fn estimate_zc(totals: &[f64]) -> ZcEstimate {
    let ratios: Vec<f64> = totals
        .windows(2)
        .skip(1)
        .filter(|w| w[1] > 0.0)
        .map(|w| w[0] / w[1])
        .collect();
    let tail: Vec<f64> = ratios.iter().rev().take(3).rev().copied().collect();
    let last = tail.last().copied().unwrap_or(f64::INFINITY);
    let aitken = if tail.len() == 3 {
        let (x0, x1, x2) = (tail[0], tail[1], tail[2]);
        let den = x2 - 2.0 * x1 + x0;
        (den.abs() > 1e-12 * x2.abs()).then(|| x2 - (x2 - x1).powi(2) / den)
    } else {
        None
    };
    let estimate = match aitken {
        Some(a) if a.is_finite() && a > 0.0 => a,
        _ => last,
    };
    ZcEstimate {
        estimate,
        last_ratios: tail,
        aitken,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiReport {
    pub z: f64,
    pub value: f64,
    pub partial_sums: Vec<f64>,
    /// Geometric-tail estimate of Σ_{n>n_max} aₙ zⁿ.
    pub remainder: f64,
    pub zc: ZcEstimate,
    pub warnings: Vec<String>,
}

/// χ(z) ≈ Σ_{n ≤ n_max} (Σ_x c_n(x)) zⁿ.
pub fn chi_series(series: &WalkSeries, z: f64) -> Result<ChiReport> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(LabError::invalid("z", "must be finite and nonnegative"));
    }
    let a = series.totals();
    let mut partial_sums = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    for (n, &an) in a.iter().enumerate() {
        acc += an * z.powi(n as i32);
        partial_sums.push(acc);
    }
    let remainder = series_remainder(&a, z);
    let zc = estimate_zc(&a);
    let mut warnings = Vec::new();
    if z >= RELIABLE_FRACTION * zc.estimate {
        warnings.push(format!(
            "z = {z} is at or beyond the reliable radius (z_c estimate {:.6}); the series may diverge",
            zc.estimate
        ));
    }
    Ok(ChiReport {
        z,
        value: acc,
        partial_sums,
        remainder,
        zc,
        warnings,
    })
}

fn series_remainder(a: &[f64], z: f64) -> f64 {
    let n = a.len() - 1;
    if n == 0 || z == 0.0 {
        return 0.0;
    }
    if a[n - 1] <= 0.0 {
        return if a[n] == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let r = a[n] / a[n - 1] * z;
    if r >= 1.0 {
        f64::INFINITY
    } else {
        a[n] * z.powi(n as i32) * r / (1.0 - r)
    }
}

/// B(z) = Σ_x G_z(x)² from the truncated series.
pub fn bubble_saw(series: &WalkSeries, z: f64) -> Result<(f64, f64)> {
    let chi = chi_series(series, z)?;
    let g = series.two_point(z);
    let b: f64 = g.values().map(|v| v * v).sum();
    // G ≤ G(0) = 1 away from the truncation, so the missing part is at most 2R + R².
    let r = chi.remainder;
    Ok((b, 2.0 * r + r * r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffInequalityRecord {
    pub z: f64,
    pub zc_est: f64,
    pub b_est: f64,
    pub chi: f64,
    pub chi_remainder: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    pub upper_vacuous: bool,
    pub truncation_dominated: bool,
}

/// zc/(zc−z) ≤ χ(z) ≤ B(zc)(zc/(zc−z) + 1).
pub fn check_diff_inequality(series: &WalkSeries, z: f64, zc_est: f64, b_est: f64) -> Result<DiffInequalityRecord> {
    if !(z >= 0.0 && z < zc_est) {
        return Err(LabError::invalid("z", "must satisfy 0 <= z < zc_est"));
    }
    let chi = chi_series(series, z)?;
    let lower = zc_est / (zc_est - z);
    let upper = b_est * (lower + 1.0);
    let rem = chi.remainder;
    Ok(DiffInequalityRecord {
        z,
        zc_est,
        b_est,
        chi: chi.value,
        chi_remainder: rem,
        lower,
        upper,
        lower_margin: chi.value - lower,
        upper_margin: upper - chi.value,
        lower_holds: chi.value + rem >= lower,
        upper_holds: chi.value <= upper,
        upper_vacuous: !upper.is_finite(),
        truncation_dominated: rem.is_nan() || rem > 0.1 * lower.min(upper) || rem > 0.1 * chi.value,
    })
}

#[derive(Clone, Debug)]
pub struct LaceCoefficients {
    d: usize,
    mode: Mode,
    base: u64,
    /// Index m holds π_m; entries 0 and 1 are empty.
    pi: Levels,
}

fn convolve_sparse<T: Coef>(a: &SparseMap<T>, b: &SparseMap<T>, out: &mut SparseMap<T>, sign_neg: bool) -> Result<()> {
    for (x, &va) in a {
        for (y, &vb) in b {
            let p: Point = x.iter().zip(y).map(|(s, t)| s + t).collect();
            let prod = va.mul(vb)?;
            let slot = out.entry(p).or_insert_with(T::zero);
            *slot = if sign_neg { slot.sub(prod)? } else { slot.add(prod)? };
        }
    }
    Ok(())
}

/// The right-hand side D∗c_n + Σ_{m=2}^{n+1} π_m ∗ c_{n+1−m} (π_{n+1} ∗ c_0 included
/// only when `with_top` is set).
fn recursion_rhs<T: Coef>(
    steps: &SparseMap<T>,
    c: &[SparseMap<T>],
    pi: &[SparseMap<T>],
    n: usize,
    with_top: bool,
) -> Result<SparseMap<T>> {
    let mut out = SparseMap::new();
    convolve_sparse(steps, &c[n], &mut out, false)?;
    let top = if with_top { n + 1 } else { n };
    for m in 2..=top {
        convolve_sparse(&pi[m], &c[n + 1 - m], &mut out, false)?;
    }
    Ok(out)
}

fn extract_with<T: Coef>(steps: &SparseMap<T>, c: &[SparseMap<T>]) -> Result<Vec<SparseMap<T>>> {
    let n_max = c.len() - 1;
    let mut pi: Vec<SparseMap<T>> = vec![SparseMap::new(); n_max + 1];
    for n in 1..n_max {
        let rhs = recursion_rhs(steps, c, &pi, n, false)?;
        let mut p = c[n + 1].clone();
        for (x, v) in rhs {
            let slot = p.entry(x).or_insert_with(T::zero);
            *slot = slot.sub(v)?;
        }
        p.retain(|_, v| *v != T::zero());
        pi[n + 1] = p;
    }
    Ok(pi)
}

fn reconstruct_with<T: Coef>(
    steps: &SparseMap<T>,
    c: &[SparseMap<T>],
    pi: &[SparseMap<T>],
) -> Result<Vec<SparseMap<T>>> {
    let mut out = vec![SparseMap::new(); c.len()];
    for n in 0..c.len() - 1 {
        let mut r = recursion_rhs(steps, c, pi, n, true)?;
        r.retain(|_, v| *v != T::zero());
        out[n + 1] = r;
    }
    Ok(out)
}

impl WalkSeries {
    fn step_map_exact(&self) -> SparseMap<i128> {
        self.steps.iter().map(|(p, _)| (p.clone(), 1)).collect()
    }

    fn step_map_float(&self) -> SparseMap<f64> {
        self.steps.iter().map(|(p, w)| (p.clone(), *w)).collect()
    }
}

/// Solves the recursion for π_m, m = 2, …, n_max.
pub fn extract_lace(series: &WalkSeries) -> Result<LaceCoefficients> {
    if series.n_max < 2 {
        return Err(LabError::invalid("n_max", "lace extraction needs n_max >= 2"));
    }
    let pi = match &series.levels {
        Levels::Exact(c) => Levels::Exact(extract_with(&series.step_map_exact(), c)?),
        Levels::Float(c) => Levels::Float(extract_with(&series.step_map_float(), c)?),
    };
    Ok(LaceCoefficients {
        d: series.d,
        mode: series.mode,
        base: series.base,
        pi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mode: Mode,
    pub levels_checked: usize,
    /// Number of (n, x) entries that differ (rational mode: any difference at all).
    pub mismatches: usize,
    pub max_abs_error: f64,
    pub exact: bool,
}

impl LaceCoefficients {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn m_max(&self) -> usize {
        match &self.pi {
            Levels::Exact(p) => p.len() - 1,
            Levels::Float(p) => p.len() - 1,
        }
    }

    /// π_m(x).
    pub fn value(&self, m: usize, x: &[i64]) -> f64 {
        match &self.pi {
            Levels::Exact(p) => p[m]
                .get(x)
                .map_or(0.0, |&v| v as f64 * (self.base as f64).powi(-(m as i32))),
            Levels::Float(p) => p[m].get(x).copied().unwrap_or(0.0),
        }
    }

    /// Exact numerator of π_m(x) over b^m.
    pub fn numerator(&self, m: usize, x: &[i64]) -> Option<i128> {
        match &self.pi {
            Levels::Exact(p) => Some(p[m].get(x).copied().unwrap_or(0)),
            Levels::Float(_) => None,
        }
    }

    pub fn coefficient(&self, m: usize) -> Vec<(Vec<i64>, f64)> {
        let keys: Vec<Point> = match &self.pi {
            Levels::Exact(p) => p[m].keys().cloned().collect(),
            Levels::Float(p) => p[m].keys().cloned().collect(),
        };
        let mut out: Vec<_> = keys
            .into_iter()
            .map(|x| {
                let v = self.value(m, &x);
                (x, v)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Σ_x π_m(x).
    pub fn total(&self, m: usize) -> f64 {
        self.coefficient(m).iter().map(|(_, v)| v).sum()
    }

    /// Σ_x |π_m(x)|.
    pub fn abs_total(&self, m: usize) -> f64 {
        self.coefficient(m).iter().map(|(_, v)| v.abs()).sum()
    }

    /// Π_z(x) = Σ_m π_m(x) z^m.
    pub fn pi_z(&self, z: f64) -> BTreeMap<Vec<i64>, f64> {
        let mut out = BTreeMap::new();
        for m in 2..=self.m_max() {
            for (x, v) in self.coefficient(m) {
                *out.entry(x).or_insert(0.0) += v * z.powi(m as i32);
            }
        }
        out
    }

    /// Π̂_z(k).
    pub fn pi_hat(&self, z: f64, k: &[f64]) -> f64 {
        debug_assert_eq!(k.len(), self.d);
        self.pi_z(z)
            .iter()
            .map(|(x, v)| v * x.iter().zip(k).map(|(&a, b)| a as f64 * b).sum::<f64>().cos())
            .sum()
    }

    /// Re-inserts π into the recursion and compares with every c_{n+1}.
    pub fn reconstruct(&self, series: &WalkSeries) -> Result<ReconstructionReport> {
        match (&self.pi, &series.levels) {
            (Levels::Exact(pi), Levels::Exact(c)) => {
                let rec = reconstruct_with(&series.step_map_exact(), c, pi)?;
                let mut mismatches = 0;
                for n in 1..c.len() {
                    let mut want = c[n].clone();
                    want.retain(|_, v| *v != 0);
                    if rec[n] != want {
                        let keys: std::collections::HashSet<_> = want.keys().chain(rec[n].keys()).collect();
                        mismatches += keys.into_iter().filter(|x| want.get(*x) != rec[n].get(*x)).count();
                    }
                }
                Ok(ReconstructionReport {
                    mode: Mode::Rational,
                    levels_checked: c.len() - 1,
                    mismatches,
                    max_abs_error: if mismatches == 0 { 0.0 } else { f64::NAN },
                    exact: mismatches == 0,
                })
            }
            (Levels::Float(pi), Levels::Float(c)) => {
                let rec = reconstruct_with(&series.step_map_float(), c, pi)?;
                let mut max_err = 0.0f64;
                let mut mismatches = 0;
                for n in 1..c.len() {
                    let keys: std::collections::HashSet<_> = c[n].keys().chain(rec[n].keys()).collect();
                    for x in keys {
                        let e = (c[n].get(x).copied().unwrap_or(0.0) - rec[n].get(x).copied().unwrap_or(0.0)).abs();
                        max_err = max_err.max(e);
                        if e > 1e-12 {
                            mismatches += 1;
                        }
                    }
                }
                Ok(ReconstructionReport {
                    mode: Mode::Double,
                    levels_checked: c.len() - 1,
                    mismatches,
                    max_abs_error: max_err,
                    exact: false,
                })
            }
            _ => Err(LabError::invalid(
                "mode",
                "series and coefficients were built in different modes",
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaceSummary {
    pub m: usize,
    pub sum: f64,
    pub abs_sum: f64,
}

pub fn lace_summary(lace: &LaceCoefficients) -> Vec<LaceSummary> {
    (2..=lace.m_max())
        .map(|m| LaceSummary {
            m,
            sum: lace.total(m),
            abs_sum: lace.abs_total(m),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nn(d: usize) -> StepDistribution {
        StepDistribution::nearest_neighbor(d).unwrap()
    }

    #[test]
    fn square_lattice_counts() {
        let s = enumerate(&nn(2), &EnumConfig::new(2, 6, Mode::Rational)).unwrap();
        let counts: Vec<i128> = (0..=6).map(|n| s.walk_count(n).unwrap()).collect();
        assert_eq!(counts, vec![1, 4, 12, 36, 100, 284, 780]);
    }

    #[test]
    fn line_has_two_walks() {
        let s = enumerate(&nn(1), &EnumConfig::new(1, 10, Mode::Rational)).unwrap();
        for n in 1..=10 {
            assert_eq!(s.total(n), 2f64.powi(1 - n as i32));
        }
    }

    #[test]
    fn budget_enforced() {
        let e = enumerate(&nn(2), &EnumConfig::new(2, 11, Mode::Rational)).unwrap_err();
        assert_eq!(
            e,
            LabError::BudgetExceeded {
                requested: 11,
                budget: 10
            }
        );
    }

    #[test]
    fn pi_two_at_origin() {
        for d in 1..=3 {
            let s = enumerate(&nn(d), &EnumConfig::new(d, 4, Mode::Rational)).unwrap();
            let lace = extract_lace(&s).unwrap();
            let origin = vec![0; d];
            assert_eq!(lace.numerator(2, &origin), Some(-(2 * d as i128)));
            assert_eq!(lace.value(2, &origin), -1.0 / (2 * d) as f64);
            assert_eq!(lace.coefficient(2).len(), 1);
        }
    }

    #[test]
    fn aitken_on_geometric_ratios() {
        let a: Vec<f64> = (0..10).map(|n| if n == 0 { 1.0 } else { 2f64.powi(1 - n) }).collect();
        let e = estimate_zc(&a);
        assert_eq!(e.estimate, 2.0);
        assert_eq!(e.last_ratios, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn power_law_support_capped() {
        let p = StepDistribution::power_law(2, 1, 1.5).unwrap();
        let s = enumerate(&p, &EnumConfig::new(2, 3, Mode::Double)).unwrap();
        assert!(s.branching() <= MAX_BRANCHING);
        assert!(s.weight_loss() > 0.0);
        assert!(enumerate(&p, &EnumConfig::new(2, 3, Mode::Rational)).is_err());
    }
}
