//! Sums over the dual grid of a torus.
//!
//! For the separable families the symbol D̂(k) only depends on the multiset
//! of |m_j|, so the Mᵈ-point sum collapses onto non-decreasing index tuples
//! weighted by their orbit sizes. Power-law symbols go through a full grid.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::step_dist::{dirichlet, Family, StepDistribution};
use crate::torus::{folded_symbol, TorusGrid};

/// Full-grid symbol tables above this many points are refused.
pub const FULL_GRID_LIMIT: usize = 1 << 24;

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.add(other.sum);
        self.add(other.comp);
        self
    }
}

/// One dual-grid point as seen by a quadrature integrand.
#[derive(Clone, Copy, Debug)]
pub struct KPoint {
    pub dhat: f64,
    /// max_j |m_j| for k = 2πm/M.
    pub max_index: usize,
    /// Σ_j m_j².
    pub sum_sq_index: u64,
}

impl KPoint {
    pub fn is_zero(&self) -> bool {
        self.max_index == 0
    }
}

#[derive(Clone, Debug)]
enum Symbol {
    NearestNeighbor,
    Uniform { l: u32, norm: f64 },
}

/// The dual grid of a torus of side M in d dimensions, with D̂ attached.
#[derive(Clone, Debug)]
pub struct DualGrid {
    d: usize,
    m: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Orbit(Symbol),
    Full(Vec<f64>, TorusGrid),
}

impl DualGrid {
    /// Orbit-reduced grid for separable families, full grid otherwise.
    pub fn new(dist: &StepDistribution, m: usize) -> Result<Self> {
        if m < 4 || !m.is_multiple_of(2) {
            return Err(LabError::invalid("M", "side length must be even and at least 4"));
        }
        let d = dist.dim();
        let kind = match dist.family() {
            Family::NearestNeighbor => Kind::Orbit(Symbol::NearestNeighbor),
            Family::UniformSpreadOut => Kind::Orbit(Symbol::Uniform {
                l: dist.l(),
                norm: dist.norm_const(),
            }),
            Family::PowerLaw => return Self::full(dist, m),
        };
        Ok(Self { d, m, kind })
    }

    /// Full-grid table from the folded distribution and the FFT.
    pub fn full(dist: &StepDistribution, m: usize) -> Result<Self> {
        let grid = TorusGrid::new(dist.dim(), m)?;
        if grid.num_sites() > FULL_GRID_LIMIT {
            return Err(LabError::SizeGuard {
                what: "full dual grid".into(),
                size: grid.num_sites(),
                limit: FULL_GRID_LIMIT,
            });
        }
        let sym = folded_symbol(dist, &grid)?;
        Ok(Self {
            d: dist.dim(),
            m,
            kind: Kind::Full(sym, grid),
        })
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_points(&self) -> f64 {
        (self.m as f64).powi(self.d as i32)
    }

    /// Spacing 2π/M between dual points.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    pub fn is_orbit(&self) -> bool {
        matches!(self.kind, Kind::Orbit(_))
    }

    /// Σ over all Mᵈ dual points of f.
    pub fn sum(&self, f: impl Fn(&KPoint) -> f64 + Sync) -> f64 {
        self.fold(KahanSum::default, |acc, p, w| acc.add(w * f(p)), KahanSum::merge)
            .value()
    }

    /// (1/Mᵈ) Σ_k f.
    pub fn mean(&self, f: impl Fn(&KPoint) -> f64 + Sync) -> f64 {
        self.sum(f) / self.num_points()
    }

    /// Minimum of f over the points where `keep` holds.
    pub fn min(&self, keep: impl Fn(&KPoint) -> bool + Sync, f: impl Fn(&KPoint) -> f64 + Sync) -> f64 {
        self.fold(
            || f64::INFINITY,
            |acc, p, _| {
                if keep(p) {
                    *acc = acc.min(f(p));
                }
            },
            f64::min,
        )
    }

    /// Generic reduction: `step(acc, point, multiplicity)`, merged in a fixed order.
    pub fn fold<A: Send>(
        &self,
        init: impl Fn() -> A + Sync,
        step: impl Fn(&mut A, &KPoint, f64) + Sync,
        merge: impl Fn(A, A) -> A,
    ) -> A {
        match &self.kind {
            Kind::Full(sym, grid) => {
                let chunk = 4096;
                let parts: Vec<A> = sym
                    .par_chunks(chunk)
                    .enumerate()
                    .map(|(c, vals)| {
                        let mut acc = init();
                        for (i, &dhat) in vals.iter().enumerate() {
                            let x = grid.centered(c * chunk + i);
                            let p = KPoint {
                                dhat,
                                max_index: x.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0),
                                sum_sq_index: x.iter().map(|v| (v * v) as u64).sum(),
                            };
                            step(&mut acc, &p, 1.0);
                        }
                        acc
                    })
                    .collect();
                parts.into_iter().fold(init(), merge)
            }
            Kind::Orbit(sym) => self.fold_orbits(sym, init, step, merge),
        }
    }

    fn fold_orbits<A: Send>(
        &self,
        sym: &Symbol,
        init: impl Fn() -> A + Sync,
        step: impl Fn(&mut A, &KPoint, f64) + Sync,
        merge: impl Fn(A, A) -> A,
    ) -> A {
        let (d, m) = (self.d, self.m);
        let top = m / 2;
        let factor: Vec<f64> = (0..=top)
            .map(|v| {
                let t = 2.0 * PI * v as f64 / m as f64;
                match sym {
                    Symbol::NearestNeighbor => t.cos(),
                    Symbol::Uniform { l, .. } => dirichlet(*l, t),
                }
            })
            .collect();
        let mult: Vec<f64> = (0..=top).map(|v| if v == 0 || v == top { 1.0 } else { 2.0 }).collect();
        let finish = |state: f64| match sym {
            Symbol::NearestNeighbor => state / d as f64,
            Symbol::Uniform { norm, .. } => (state - 1.0) / norm,
        };
        let combine = |state: f64, f: f64, c: usize| match sym {
            Symbol::NearestNeighbor => state + c as f64 * f,
            Symbol::Uniform { .. } => state * f.powi(c as i32),
        };
        let unit = match sym {
            Symbol::NearestNeighbor => 0.0,
            Symbol::Uniform { .. } => 1.0,
        };

        struct Ctx<'a, S> {
            factor: &'a [f64],
            mult: &'a [f64],
            binom: Vec<Vec<f64>>,
            step: &'a S,
        }

        #[allow(clippy::too_many_arguments)]
        fn rec<A, S: Fn(&mut A, &KPoint, f64)>(
            ctx: &Ctx<'_, S>,
            v: usize,
            remaining: usize,
            state: f64,
            weight: f64,
            max_index: usize,
            sum_sq: u64,
            acc: &mut A,
            combine: &dyn Fn(f64, f64, usize) -> f64,
            finish: &dyn Fn(f64) -> f64,
        ) {
            if remaining == 0 {
                let p = KPoint {
                    dhat: finish(state),
                    max_index,
                    sum_sq_index: sum_sq,
                };
                (ctx.step)(acc, &p, weight);
                return;
            }
            // v counts down; index 0 absorbs whatever is left.
            if v == 0 {
                let s = combine(state, ctx.factor[0], remaining);
                rec(ctx, 0, 0, s, weight, max_index, sum_sq, acc, combine, finish);
                return;
            }
            for c in 0..=remaining {
                let w = weight * ctx.binom[remaining][c] * ctx.mult[v].powi(c as i32);
                let s = combine(state, ctx.factor[v], c);
                let mi = if c > 0 { max_index.max(v) } else { max_index };
                let sq = sum_sq + (c as u64) * (v as u64) * (v as u64);
                rec(ctx, v - 1, remaining - c, s, w, mi, sq, acc, combine, finish);
            }
        }

        let mut binom = vec![vec![0.0; d + 1]; d + 1];
        for n in 0..=d {
            binom[n][0] = 1.0;
            for k in 1..=n {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0.0 };
            }
        }
        let ctx = Ctx {
            factor: &factor,
            mult: &mult,
            binom,
            step: &step,
        };

        // Task per (largest index present, its count); plus the origin.
        let tasks: Vec<(usize, usize)> = (1..=top).flat_map(|v| (1..=d).map(move |c| (v, c))).collect();
        let parts: Vec<A> = tasks
            .par_iter()
            .map(|&(v, c)| {
                let mut acc = init();
                let w = ctx.binom[d][c] * ctx.mult[v].powi(c as i32);
                let s = combine(unit, factor[v], c);
                rec(
                    &ctx,
                    v - 1,
                    d - c,
                    s,
                    w,
                    v,
                    (c as u64) * (v as u64) * (v as u64),
                    &mut acc,
                    &combine,
                    &finish,
                );
                acc
            })
            .collect();
        let mut acc = init();
        let origin = KPoint {
            dhat: finish(combine(unit, factor[0], d)),
            max_index: 0,
            sum_sq_index: 0,
        };
        step(&mut acc, &origin, 1.0);
        parts.into_iter().fold(acc, merge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_sum_counts_every_point() {
        for (d, m) in [(1, 8), (3, 6), (5, 4), (4, 10)] {
            let dist = StepDistribution::nearest_neighbor(d).unwrap();
            let g = DualGrid::new(&dist, m).unwrap();
            let n = g.sum(|_| 1.0);
            assert!((n - (m as f64).powi(d as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn orbit_matches_full_grid() {
        for dist in [
            StepDistribution::nearest_neighbor(3).unwrap(),
            StepDistribution::uniform(2, 2).unwrap(),
            StepDistribution::uniform(3, 1).unwrap(),
        ] {
            let m = 8;
            let orbit = DualGrid::new(&dist, m).unwrap();
            let full = DualGrid::full(&dist, m).unwrap();
            let f = |p: &KPoint| p.dhat.powi(2) + (p.max_index as f64) * 0.1 + (p.sum_sq_index as f64) * 0.01;
            let a = orbit.sum(f);
            let b = full.sum(f);
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
            let (x, y) = (
                orbit.min(|p| !p.is_zero(), |p| p.dhat),
                full.min(|p| !p.is_zero(), |p| p.dhat),
            );
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-17);
        }
        assert!((k.value() - (1.0 + 1e-14)).abs() < 1e-18);
    }
}
