//! Diagrams and bootstrap quantities built from a two-point function on a
//! dual grid, plus the standalone trigonometric inequalities used to bound
//! them.
//!
//! Ĉ_λ(k) = 1/(1 − λD̂(k)) throughout, with λ = 1 − 1/χ.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::PeriodicBox;
use crate::random_walk::c_hat;
use crate::rng::{domain, stream_rng};
use crate::step_dist::StepDistribution;
use crate::torus::{
    convolve, convolve_direct, dft, folded_symbol, idft, one_minus_cos_sum, Space, TorusField, TorusGrid,
    DIRECT_CONVOLUTION_LIMIT,
};

/// Grids with at most this many points get the exhaustive (k, l) supremum.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 4096;
/// Pairs drawn when the (k, l) supremum is sampled.
pub const SAMPLED_PAIRS: usize = 1 << 20;
/// U_λ prefactor.
pub const U_CONSTANT: f64 = 200.0;
/// Constant in the sup_x [1 − cos(k·x)] G(x) bound.
pub const COS_G_CONSTANT: f64 = 300.0;
/// Multiple of the standard error allowed when inputs are noisy.
pub const NOISE_SIGMAS: f64 = 3.0;

const TOL: f64 = 1e-12;

/// Ĝ on the dual grid of a torus, with τ and D̂ on the same grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointInput {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub ghat: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ghat_se: Option<Vec<f64>>,
    pub dhat: Vec<f64>,
    pub tau: f64,
}

impl TwoPointInput {
    pub fn new(
        d: usize,
        m: usize,
        ghat: Vec<f64>,
        dhat: Vec<f64>,
        tau: f64,
        ghat_se: Option<Vec<f64>>,
    ) -> Result<Self> {
        let input = Self {
            d,
            m,
            ghat,
            ghat_se,
            dhat,
            tau,
        };
        input.validate()?;
        Ok(input)
    }

    /// The free model Ĉ_z = 1/(1 − zD̂) with τ = z.
    pub fn free(dist: &StepDistribution, m: usize, z: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&z) {
            return Err(LabError::invalid("z", "free model needs 0 ≤ z < 1"));
        }
        let grid = TorusGrid::new(dist.dim(), m)?;
        let dhat = folded_symbol(dist, &grid)?;
        let ghat = dhat.iter().map(|&d| 1.0 / (1.0 - z * d)).collect();
        Self::new(dist.dim(), m, ghat, dhat, z, None)
    }

    /// Transforms an x-space two-point function G(x) (and optional errors,
    /// propagated as Σ_x se(x)).
    pub fn from_xspace(d: usize, m: usize, g: &[f64], dhat: Vec<f64>, tau: f64, g_se: Option<&[f64]>) -> Result<Self> {
        let grid = TorusGrid::new(d, m)?;
        let ghat = dft(&TorusField::from_real(&grid, Space::X, g)?)?.real();
        let se = g_se.map(|s| vec![s.iter().map(|v| v.abs()).sum::<f64>(); ghat.len()]);
        Self::new(d, m, ghat, dhat, tau, se)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.d, self.m)
    }

    pub fn chi(&self) -> f64 {
        self.ghat[0]
    }

    pub fn lambda(&self) -> f64 {
        (1.0 - 1.0 / self.chi()).clamp(0.0, 1.0)
    }

    pub fn c_lambda(&self) -> Vec<f64> {
        let l = self.lambda();
        self.dhat.iter().map(|&d| c_hat(l, d)).collect()
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let n = grid.num_sites();
        for (name, len) in [("ghat", self.ghat.len()), ("dhat", self.dhat.len())] {
            if len != n {
                return Err(LabError::invalid(name, format!("expected {n} grid values, got {len}")));
            }
        }
        if let Some(se) = &self.ghat_se {
            if se.len() != n || se.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(LabError::invalid(
                    "ghat_se",
                    "must hold one nonnegative error per grid point",
                ));
            }
        }
        if self.ghat.iter().chain(&self.dhat).any(|v| !v.is_finite()) {
            return Err(LabError::invalid("ghat", "values must be finite"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(LabError::invalid("tau", "must be finite and nonnegative"));
        }
        let lat = grid.lattice();
        let scale = self.ghat.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for k in 0..n {
            let nk = lat.neg(k);
            if (self.ghat[k] - self.ghat[nk]).abs() > 1e-10 * scale || (self.dhat[k] - self.dhat[nk]).abs() > 1e-10 {
                return Err(LabError::invalid(
                    "ghat",
                    "two-point function must be symmetric under k → −k",
                ));
            }
        }
        let slack = self.ghat_se.as_ref().map_or(0.0, |s| NOISE_SIGMAS * s[0]);
        if self.chi() < 1.0 - 1e-12 - slack {
            return Err(LabError::invalid("ghat", "Ĝ(0) = χ must be at least 1"));
        }
        Ok(())
    }

    fn xspace(&self, grid: &TorusGrid, values: &[f64]) -> Result<Vec<f64>> {
        Ok(idft(&TorusField::from_real(grid, Space::K, values)?)?.real())
    }

    /// Bound on |δG(x)| implied by the k-space errors.
    fn x_noise(&self) -> f64 {
        self.ghat_se
            .as_ref()
            .map_or(0.0, |s| s.iter().sum::<f64>() / s.len() as f64)
    }
}

fn conv(grid: &TorusGrid, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let a = TorusField::from_real(grid, Space::X, f)?;
    let b = TorusField::from_real(grid, Space::X, g)?;
    Ok(if grid.num_sites() <= DIRECT_CONVOLUTION_LIMIT {
        convolve_direct(&a, &b)?
    } else {
        convolve(&a, &b)?
    }
    .real())
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagrams {
    pub b: f64,
    pub t: f64,
    pub nabla: f64,
    pub b_tilde: f64,
    pub b_x: f64,
    pub t_x: f64,
    pub nabla_x: f64,
    pub b_tilde_x: f64,
    /// Largest relative k-space/x-space disagreement.
    pub parseval_dev: f64,
    pub xspace_method: String,
}

/// B, T, ∇ = (D∗G∗G∗G)(0) and B̃ = (G̃∗G̃)(0), G̃ = τD∗G, in both spaces.
pub fn bubble_triangle(input: &TwoPointInput) -> Result<Diagrams> {
    let grid = input.grid()?;
    let n = grid.num_sites();
    let (g, dh, tau) = (&input.ghat, &input.dhat, input.tau);
    let b = mean(g.iter().map(|v| v * v), n);
    let t = mean(g.iter().map(|v| v * v * v), n);
    let nabla = mean(g.iter().zip(dh).map(|(v, d)| d * v * v * v), n);
    let b_tilde = mean(g.iter().zip(dh).map(|(v, d)| (tau * d * v).powi(2)), n);

    let gx = input.xspace(&grid, g)?;
    let dx = input.xspace(&grid, dh)?;
    let lat = grid.lattice();
    let gg = conv(&grid, &gx, &gx)?;
    let ggg = conv(&grid, &gg, &gx)?;
    let gt: Vec<f64> = conv(&grid, &dx, &gx)?.iter().map(|v| tau * v).collect();
    let b_x: f64 = gx.iter().map(|v| v * v).sum();
    let t_x = ggg[0];
    let nabla_x: f64 = (0..n).map(|x| dx[x] * ggg[lat.neg(x)]).sum();
    let b_tilde_x: f64 = gt.iter().map(|v| v * v).sum();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    let parseval_dev = rel(b, b_x)
        .max(rel(t, t_x))
        .max(rel(nabla, nabla_x))
        .max(rel(b_tilde, b_tilde_x));
    Ok(Diagrams {
        b,
        t,
        nabla,
        b_tilde,
        b_x,
        t_x,
        nabla_x,
        b_tilde_x,
        parseval_dev,
        xspace_method: if n <= DIRECT_CONVOLUTION_LIMIT { "direct" } else { "fft" }.into(),
    })
}

/// G̃(x) = τ(D∗G)(x).
pub fn g_tilde(input: &TwoPointInput) -> Result<Vec<f64>> {
    let grid = input.grid()?;
    let prod: Vec<f64> = input
        .ghat
        .iter()
        .zip(&input.dhat)
        .map(|(g, d)| input.tau * g * d)
        .collect();
    input.xspace(&grid, &prod)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub b_tilde: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_mass: Option<f64>,
    pub iterations: usize,
    pub bound: f64,
    pub holds: bool,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

/// ψ̃ mass Σ_x ψ̃(0, x) = Σ_{j≥1} Σ_x (G̃²)^{∗j}(x) from a given G̃(x).
pub fn chain_of_bubbles_x(lat: &PeriodicBox, gt: &[f64]) -> Result<ChainRecord> {
    let grid = TorusGrid::new(lat.dim(), lat.side())?;
    let w: Vec<f64> = gt.iter().map(|v| v * v).collect();
    let b_tilde: f64 = w.iter().sum();
    if b_tilde >= 0.5 {
        return Ok(ChainRecord {
            b_tilde,
            psi_mass: None,
            iterations: 0,
            bound: 2.0 * b_tilde,
            holds: false,
            converged: false,
            flag: Some(format!("B̃ = {b_tilde} ≥ 1/2; chain of bubbles not summed")),
        });
    }
    let wk = dft(&TorusField::from_real(&grid, Space::X, &w)?)?;
    let mut term = wk.clone();
    let mut psi = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 100_000 {
        let inc: f64 = idft(&term)?.real().iter().sum();
        psi += inc;
        iterations += 1;
        if inc.abs() < 1e-12 {
            converged = true;
            break;
        }
        term = term.mul(&wk)?;
    }
    Ok(ChainRecord {
        b_tilde,
        psi_mass: Some(psi),
        iterations,
        bound: 2.0 * b_tilde,
        holds: psi <= 2.0 * b_tilde + TOL,
        converged,
        flag: (!converged).then(|| "series did not reach the 1e-12 increment".to_string()),
    })
}

pub fn chain_of_bubbles(input: &TwoPointInput) -> Result<ChainRecord> {
    let grid = input.grid()?;
    chain_of_bubbles_x(grid.lattice(), &g_tilde(input)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub lambda: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f3_mode: PairMode,
    pub f3_pairs: usize,
    /// (k, l) dual indices attaining f₃.
    pub f3_argmax: (usize, usize),
}

impl BootstrapRecord {
    pub fn max(&self) -> f64 {
        self.f1.max(self.f2).max(self.f3)
    }
}

/// U_λ(k, l).
pub fn u_lambda(c: &[f64], lat: &PeriodicBox, k: usize, l: usize) -> f64 {
    let (lm, lp) = (lat.sub(l, k), lat.add(l, k));
    U_CONSTANT / c[k] * (c[lm] * c[l] + c[l] * c[lp] + c[lm] * c[lp])
}

/// f₁ = τ, f₂ = sup Ĝ/Ĉ_λ, f₃ = sup |Δ_kĜ(l)|/U_λ(k, l).
pub fn bootstrap_f(input: &TwoPointInput) -> Result<BootstrapRecord> {
    let grid = input.grid()?;
    let lat = grid.lattice();
    let n = grid.num_sites();
    let c = input.c_lambda();
    let g = &input.ghat;
    let f2 = g.iter().zip(&c).map(|(g, c)| g / c).fold(f64::NEG_INFINITY, f64::max);
    let ratio = |k: usize, l: usize| {
        let delta = g[lat.sub(l, k)] + g[lat.add(l, k)] - 2.0 * g[l];
        delta.abs() / u_lambda(&c, lat, k, l)
    };
    let better = |a: (f64, usize, usize), b: (f64, usize, usize)| {
        if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
            b
        } else {
            a
        }
    };
    let (best, mode, pairs) = if n <= EXHAUSTIVE_PAIR_LIMIT {
        let best = (0..n)
            .into_par_iter()
            .map(|k| {
                (0..n)
                    .map(|l| (ratio(k, l), k, l))
                    .fold((f64::NEG_INFINITY, 0, 0), better)
            })
            .reduce(|| (f64::NEG_INFINITY, 0, 0), better);
        (best, PairMode::Exhaustive, n * n)
    } else {
        let mut rng = stream_rng(0, domain::DIAGNOSTICS, 0);
        let mut best = (0..n)
            .map(|l| (ratio(0, l), 0, l))
            .fold((f64::NEG_INFINITY, 0, 0), better);
        for _ in 0..SAMPLED_PAIRS {
            let (k, l) = (rng.gen_range(0..n), rng.gen_range(0..n));
            best = better(best, (ratio(k, l), k, l));
        }
        (best, PairMode::Sampled, SAMPLED_PAIRS + n)
    };
    Ok(BootstrapRecord {
        lambda: input.lambda(),
        f1: input.tau,
        f2,
        f3: best.0,
        f3_mode: mode,
        f3_pairs: pairs,
        f3_argmax: (best.1, best.2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfraredRecord {
    pub sup_deviation: f64,
    pub argmax: usize,
    pub rho_min: f64,
    pub rho_max: f64,
}

/// sup_k |Ĝ(k)(χ^{−1} + τ[1 − D̂(k)]) − 1|.
pub fn infrared_check(input: &TwoPointInput) -> InfraredRecord {
    let chi = input.chi();
    let rho: Vec<f64> = input
        .ghat
        .iter()
        .zip(&input.dhat)
        .map(|(g, d)| g * (1.0 / chi + input.tau * (1.0 - d)))
        .collect();
    let (argmax, sup) = rho
        .iter()
        .map(|r| (r - 1.0).abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    InfraredRecord {
        sup_deviation: sup,
        argmax,
        rho_min: rho.iter().cloned().fold(f64::INFINITY, f64::min),
        rho_max: rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityRecord {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + TOL * rhs.abs().max(1.0),
        }
    }
}

/// Fourier data of a symmetric x-space field a with Σ|a| < 1.
#[derive(Clone, Debug)]
pub struct TrigLemmaData {
    lattice: PeriodicBox,
    big_a: Vec<f64>,
    abs_hat: Vec<f64>,
}

impl TrigLemmaData {
    pub fn new(grid: &TorusGrid, a: &[f64]) -> Result<Self> {
        let lat = grid.lattice();
        if !lat.is_symmetric(a, 1e-14) {
            return Err(LabError::invalid("a", "must satisfy a(x) = a(−x)"));
        }
        let a_hat = dft(&TorusField::from_real(grid, Space::X, a)?)?.real();
        if a_hat.iter().any(|v| v.abs() >= 1.0) {
            return Err(LabError::IllDefined("Â = 1/(1 − â) needs sup|â| < 1".into()));
        }
        let abs: Vec<f64> = a.iter().map(|v| v.abs()).collect();
        Ok(Self {
            lattice: lat.clone(),
            big_a: a_hat.iter().map(|v| 1.0 / (1.0 - v)).collect(),
            abs_hat: dft(&TorusField::from_real(grid, Space::X, &abs)?)?.real(),
        })
    }

    pub fn check(&self, k: usize, l: usize) -> InequalityRecord {
        let lat = &self.lattice;
        let (a, w) = (&self.big_a, &self.abs_hat);
        let (lm, lp) = (lat.sub(l, k), lat.add(l, k));
        let lhs = (a[lm] + a[lp] - 2.0 * a[l]).abs();
        let wk = w[0] - w[k];
        let rhs = (a[lm] + a[lp]) * a[l] * wk + 8.0 * a[lm] * a[l] * a[lp] * (w[0] - w[l]) * wk;
        InequalityRecord::new(lhs, rhs)
    }
}

/// |Δ_kÂ(l)| against the two-term bound, Â = 1/(1 − â).
pub fn trig_lemma_check(grid: &TorusGrid, a: &[f64], k: usize, l: usize) -> Result<InequalityRecord> {
    Ok(TrigLemmaData::new(grid, a)?.check(k, l))
}

/// 1 − cos(Σt_n) ≤ (2N + 3) Σ_{n=0}^{N} [1 − cos t_n].
pub fn cos_split_check(t_parts: &[f64]) -> Result<InequalityRecord> {
    if t_parts.is_empty() {
        return Err(LabError::invalid("t_parts", "need at least one part"));
    }
    let n = (t_parts.len() - 1) as f64;
    let lhs = 1.0 - t_parts.iter().sum::<f64>().cos();
    let rhs = (2.0 * n + 3.0) * t_parts.iter().map(|t| 1.0 - t.cos()).sum::<f64>();
    Ok(InequalityRecord::new(lhs, rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaCosRecord {
    pub lhs: f64,
    /// Σ_x [1 − cos(k·x)] |g(x)|.
    pub rhs: f64,
    pub holds: bool,
    /// Whether lhs ≤ 2·rhs.
    pub holds_doubled: bool,
}

/// |Δ_kĝ(l)| against Σ_x [1 − cos(k·x)] |g(x)| for symmetric g, at every l
/// for the given k.
pub fn delta_vs_cos_sum_check(g: &TorusField, k: usize) -> Result<Vec<DeltaCosRecord>> {
    let grid = g.grid().clone();
    let lat = grid.lattice();
    if !g.is_symmetric(1e-14) {
        return Err(LabError::invalid("g", "must satisfy g(x) = g(−x)"));
    }
    let ghat = dft(g)?.real();
    let rhs = one_minus_cos_sum(g, &grid.centered(k))?;
    Ok((0..grid.num_sites())
        .map(|l| {
            let lhs = (ghat[lat.sub(l, k)] + ghat[lat.add(l, k)] - 2.0 * ghat[l]).abs();
            let slack = TOL * rhs.max(1.0);
            DeltaCosRecord {
                lhs,
                rhs,
                holds: lhs <= rhs + slack,
                holds_doubled: lhs <= 2.0 * rhs + slack,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosGRecord {
    pub k: usize,
    /// sup_x [1 − cos(k·x)] G(x).
    pub lhs: f64,
    /// 300·K·(1 − λD̂(k))·(C_λ∗C_λ)(0).
    pub rhs: f64,
    pub holds: bool,
    pub holds_within_noise: bool,
}

/// sup_x [1 − cos(k·x)] G(x) ≤ 300 K Ĉ_λ(k)^{−1} (C_λ∗C_λ)(0) at every dual k.
pub fn cos_g_bound_check(input: &TwoPointInput, k_constant: f64) -> Result<Vec<CosGRecord>> {
    let boot = bootstrap_f(input)?;
    if k_constant < boot.max() - TOL {
        return Err(LabError::invalid(
            "K",
            format!("must be at least max(f₁, f₂, f₃) = {}", boot.max()),
        ));
    }
    let grid = input.grid()?;
    let n = grid.num_sites();
    let gx = input.xspace(&grid, &input.ghat)?;
    let c = input.c_lambda();
    let cc0 = mean(c.iter().map(|v| v * v), n);
    let noise = NOISE_SIGMAS * 2.0 * input.x_noise();
    let s = 2.0 * PI / grid.side() as f64;
    let xs: Vec<Vec<i64>> = (0..n).map(|x| grid.centered(x)).collect();
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            let kv = grid.centered(k);
            let lhs = xs
                .iter()
                .zip(&gx)
                .map(|(x, g)| {
                    let dot: f64 = x.iter().zip(&kv).map(|(a, b)| (a * b) as f64).sum::<f64>() * s;
                    (1.0 - dot.cos()) * g
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let rhs = COS_G_CONSTANT * k_constant * cc0 / c[k];
            let base = InequalityRecord::new(lhs, rhs);
            CosGRecord {
                k,
                lhs,
                rhs,
                holds: base.holds,
                holds_within_noise: lhs - noise <= rhs + TOL * rhs.max(1.0),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub min: f64,
    pub max: f64,
    /// Largest gap between Ĉ_λ(1 − D̂) and 1 + (λ − 1)D̂/(1 − λD̂).
    pub form_gap: f64,
    pub holds: bool,
}

/// 0 ≤ Ĉ_λ(k)[1 − D̂(k)] ≤ 2 over the given symbol values and λ grid.
pub fn c_lambda_identity_check(dhat: &[f64], lambdas: &[f64]) -> IdentityRecord {
    let (mut lo, mut hi, mut gap) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &l in lambdas {
        for &d in dhat {
            let v = c_hat(l, d) * (1.0 - d);
            let alt = 1.0 + (l - 1.0) * d / (1.0 - l * d);
            lo = lo.min(v);
            hi = hi.max(v);
            gap = gap.max((v - alt).abs());
        }
    }
    IdentityRecord {
        min: lo,
        max: hi,
        form_gap: gap,
        holds: lo >= -TOL && hi <= 2.0 + TOL,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenBubbleRecord {
    pub b: f64,
    pub max_open: f64,
    pub b_tilde: f64,
    pub max_open_tilde: f64,
    pub holds: bool,
}

/// (G∗G)(x) ≤ B and (G̃∗G̃)(x) ≤ B̃ for every x, from x-space fields.
pub fn open_bubble_check_x(grid: &TorusGrid, g: &[f64], gt: &[f64]) -> Result<OpenBubbleRecord> {
    let gg = conv(grid, g, g)?;
    let tt = conv(grid, gt, gt)?;
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (b, bt) = (gg[0], tt[0]);
    let (mo, mt) = (max(&gg), max(&tt));
    Ok(OpenBubbleRecord {
        b,
        max_open: mo,
        b_tilde: bt,
        max_open_tilde: mt,
        holds: mo <= b + TOL * b.abs().max(1.0) && mt <= bt + TOL * bt.abs().max(1.0),
    })
}

pub fn open_bubble_check(input: &TwoPointInput) -> Result<OpenBubbleRecord> {
    let grid = input.grid()?;
    let g = input.xspace(&grid, &input.ghat)?;
    open_bubble_check_x(&grid, &g, &g_tilde(input)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BTildeBoundRecord {
    pub k_constant: f64,
    pub b_tilde: f64,
    /// K⁴ (1/Mᵈ) Σ (D̂Ĉ_λ)².
    pub first: f64,
    /// 4K⁴ (1/Mᵈ) Σ (D̂Ĉ_λ)².
    pub second: f64,
    pub holds: bool,
}

/// B̃ ≤ K⁴ mean(D̂²Ĉ_λ²) ≤ 4K⁴ mean(D̂²Ĉ_λ²).
pub fn b_tilde_bound(input: &TwoPointInput, k_constant: f64) -> Result<BTildeBoundRecord> {
    let n = input.ghat.len();
    let d = bubble_triangle(input)?;
    let c = input.c_lambda();
    let base = mean(input.dhat.iter().zip(&c).map(|(d, c)| (d * c).powi(2)), n);
    let k4 = k_constant.powi(4);
    let first = k4 * base;
    Ok(BTildeBoundRecord {
        k_constant,
        b_tilde: d.b_tilde,
        first,
        second: 4.0 * first,
        holds: d.b_tilde <= first * (1.0 + TOL) + TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramReport {
    pub diagrams: Diagrams,
    pub chain: ChainRecord,
    pub bootstrap: BootstrapRecord,
    pub infrared: InfraredRecord,
    pub open_bubble: OpenBubbleRecord,
    pub b_tilde_bound: BTildeBoundRecord,
    /// Worst lhs/rhs over k of the sup_x [1 − cos(k·x)] G(x) bound.
    pub cos_g_worst_ratio: f64,
    pub cos_g_holds: bool,
    pub cos_g_holds_within_noise: bool,
    pub identity: IdentityRecord,
    pub flags: Vec<String>,
}

/// Every diagram and check for one input; K defaults to max(f₁, f₂, f₃, 1).
pub fn diagram_report(input: &TwoPointInput, k_constant: Option<f64>) -> Result<DiagramReport> {
    let diagrams = bubble_triangle(input)?;
    let chain = chain_of_bubbles(input)?;
    let bootstrap = bootstrap_f(input)?;
    let k = k_constant.unwrap_or_else(|| bootstrap.max().max(1.0));
    let cos_g = cos_g_bound_check(input, k)?;
    let lambdas: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut flags = Vec::new();
    if let Some(f) = &chain.flag {
        flags.push(f.clone());
    }
    if bootstrap.f3_mode == PairMode::Sampled {
        flags.push(format!("f₃ estimated from {} sampled (k, l) pairs", bootstrap.f3_pairs));
    }
    if input.ghat_se.is_some() {
        flags.push("inputs carry Monte Carlo errors; see holds_within_noise".into());
    }
    if diagrams.parseval_dev > 1e-9 {
        flags.push(format!(
            "k-space and x-space diagrams differ by {:.3e}",
            diagrams.parseval_dev
        ));
    }
    Ok(DiagramReport {
        infrared: infrared_check(input),
        open_bubble: open_bubble_check(input)?,
        b_tilde_bound: b_tilde_bound(input, k)?,
        cos_g_worst_ratio: cos_g
            .iter()
            .filter(|r| r.rhs > 0.0)
            .map(|r| r.lhs / r.rhs)
            .fold(f64::NEG_INFINITY, f64::max),
        cos_g_holds: cos_g.iter().all(|r| r.holds),
        cos_g_holds_within_noise: cos_g.iter().all(|r| r.holds_within_noise),
        identity: c_lambda_identity_check(&input.dhat, &lambdas),
        diagrams,
        chain,
        bootstrap,
        flags,
    })
}

/// Random symmetric field on `lat` with Σ|a| = `l1`.
pub fn random_symmetric(lat: &PeriodicBox, l1: f64, rng: &mut impl Rng) -> Vec<f64> {
    let n = lat.num_sites();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sym: Vec<f64> = (0..n).map(|x| 0.5 * (raw[x] + raw[lat.neg(x)])).collect();
    let norm: f64 = sym.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return sym;
    }
    sym.iter().map(|v| v * l1 / norm).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub instances: usize,
    pub cases: usize,
    pub violations: usize,
    /// Largest lhs/rhs seen (with rhs > 0).
    pub worst_ratio: f64,
}

impl SuiteEntry {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            instances: 0,
            cases: 0,
            violations: 0,
            worst_ratio: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, holds: bool) {
        self.cases += 1;
        if !holds {
            self.violations += 1;
        }
        if rhs > 0.0 {
            self.worst_ratio = self.worst_ratio.max(lhs / rhs);
        }
    }
}

/// Randomized plus exhaustive small-grid runs of every standalone inequality.
pub fn inequality_suite(instances: usize, seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    let rng = |i: usize, tag: u64| stream_rng(seed, domain::DIAGNOSTICS, (tag << 32) | i as u64);
    let g16 = TorusGrid::new(1, 16)?;
    let g2d = TorusGrid::new(2, 4)?;

    let mut e = SuiteEntry::new("trig_lemma");
    for i in 0..instances + 20 {
        let grid = if i < instances { &g16 } else { &g2d };
        let mut r = rng(i, 1);
        let l1 = r.gen_range(0.0..0.9);
        let a = random_symmetric(grid.lattice(), l1, &mut r);
        let data = TrigLemmaData::new(grid, &a)?;
        let n = grid.num_sites();
        for k in 0..n {
            for l in 0..n {
                let rec = data.check(k, l);
                e.record(rec.lhs, rec.rhs, rec.holds);
            }
        }
        e.instances += 1;
    }
    out.push(e);

    let mut lit = SuiteEntry::new("delta_vs_cos_sum");
    let mut dbl = SuiteEntry::new("delta_vs_cos_sum_doubled");
    for i in 0..instances + 20 {
        let grid = if i < instances { &g16 } else { &g2d };
        let mut r = rng(i, 2);
        let l1 = r.gen_range(0.1..2.0);
        let g = TorusField::from_real(grid, Space::X, &random_symmetric(grid.lattice(), l1, &mut r))?;
        for k in 0..grid.num_sites() {
            for rec in delta_vs_cos_sum_check(&g, k)? {
                lit.record(rec.lhs, rec.rhs, rec.holds);
                dbl.record(rec.lhs, 2.0 * rec.rhs, rec.holds_doubled);
            }
        }
        lit.instances += 1;
        dbl.instances += 1;
    }
    out.push(lit);
    out.push(dbl);

    let mut e = SuiteEntry::new("cos_split");
    for i in 0..instances {
        let mut r = rng(i, 3);
        let parts: Vec<f64> = (0..r.gen_range(1..7)).map(|_| r.gen_range(-PI..PI)).collect();
        let rec = cos_split_check(&parts)?;
        e.record(rec.lhs, rec.rhs, rec.holds);
        e.instances += 1;
    }
    for a in 0..8 {
        for b in 0..8 {
            let rec = cos_split_check(&[a as f64 * PI / 4.0, b as f64 * PI / 4.0])?;
            e.record(rec.lhs, rec.rhs, rec.holds);
            e.instances += 1;
        }
    }
    out.push(e);

    let dists = [
        StepDistribution::nearest_neighbor(1)?,
        StepDistribution::nearest_neighbor(2)?,
        StepDistribution::nearest_neighbor(3)?,
        StepDistribution::uniform(1, 2)?,
        StepDistribution::uniform(2, 1)?,
    ];
    let mut e = SuiteEntry::new("c_lambda_identity");
    for i in 0..instances {
        let mut r = rng(i, 4);
        let dist = &dists[i % dists.len()];
        let grid = TorusGrid::new(dist.dim(), 8)?;
        let dhat = folded_symbol(dist, &grid)?;
        let lam = [r.gen_range(0.0..=1.0)];
        let rec = c_lambda_identity_check(&dhat, &lam);
        e.record(rec.max, 2.0, rec.holds);
        e.instances += 1;
    }
    let all_lambda: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for dist in &dists {
        let grid = TorusGrid::new(dist.dim(), 8)?;
        let rec = c_lambda_identity_check(&folded_symbol(dist, &grid)?, &all_lambda);
        e.record(rec.max, 2.0, rec.holds);
        e.instances += 1;
    }
    out.push(e);

    let mut e = SuiteEntry::new("open_bubble");
    for i in 0..instances {
        let mut r = rng(i, 5);
        let grid = if i % 2 == 0 { &g16 } else { &g2d };
        let g = random_symmetric(grid.lattice(), r.gen_range(0.5..3.0), &mut r);
        let gt = random_symmetric(grid.lattice(), r.gen_range(0.1..1.0), &mut r);
        let rec = open_bubble_check_x(grid, &g, &gt)?;
        e.record(rec.max_open, rec.b, rec.holds);
        e.instances += 1;
    }
    for dist in &dists {
        for z in [0.1, 0.5, 0.9] {
            let rec = open_bubble_check(&TwoPointInput::free(dist, 8, z)?)?;
            e.record(rec.max_open, rec.b, rec.holds);
            e.instances += 1;
        }
    }
    out.push(e);

    let mut e = SuiteEntry::new("chain_of_bubbles");
    for i in 0..instances {
        let mut r = rng(i, 6);
        let grid = if i % 2 == 0 { &g16 } else { &g2d };
        // Σ gt² = B̃ ≤ (Σ|gt|)², so an ℓ¹ norm below 1/√2 keeps B̃ < 1/2.
        let gt = random_symmetric(grid.lattice(), r.gen_range(0.0..0.7), &mut r);
        let rec = chain_of_bubbles_x(grid.lattice(), &gt)?;
        e.record(rec.psi_mass.unwrap_or(f64::INFINITY), rec.bound, rec.holds);
        e.instances += 1;
    }
    for z in [0.1, 0.3, 0.5, 0.7] {
        let rec = chain_of_bubbles(&TwoPointInput::free(&StepDistribution::nearest_neighbor(5)?, 4, z)?)?;
        e.record(rec.psi_mass.unwrap_or(f64::INFINITY), rec.bound, rec.holds);
        e.instances += 1;
    }
    out.push(e);

    let mut e = SuiteEntry::new("cos_g_bound");
    for i in 0..instances + 9 {
        let (dist, m, z) = if i < instances {
            let mut r = rng(i, 7);
            let dist = dists[i % dists.len()].clone();
            let m = if dist.dim() == 1 { 16 } else { 8 };
            (dist, m, r.gen_range(0.0..0.95))
        } else {
            (dists[0].clone(), 8, (i - instances) as f64 / 10.0)
        };
        let input = TwoPointInput::free(&dist, m, z)?;
        let k = bootstrap_f(&input)?.max().max(1.0);
        for rec in cos_g_bound_check(&input, k)? {
            e.record(rec.lhs, rec.rhs, rec.holds);
        }
        e.instances += 1;
    }
    out.push(e);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial(d: usize, m: usize) -> TwoPointInput {
        let dist = StepDistribution::nearest_neighbor(d).unwrap();
        TwoPointInput::free(&dist, m, 0.0).unwrap()
    }

    #[test]
    fn base_point() {
        let b = bootstrap_f(&trivial(2, 8)).unwrap();
        assert_eq!((b.f1, b.f2, b.f3), (0.0, 1.0, 0.0));
    }

    #[test]
    fn u_at_lambda_zero() {
        let lat = PeriodicBox::new(1, 8).unwrap();
        let c = vec![1.0; 8];
        assert_eq!(u_lambda(&c, &lat, 3, 5), 600.0);
    }

    #[test]
    fn trivial_diagrams() {
        let r = bubble_triangle(&trivial(2, 8)).unwrap();
        assert!((r.b - 1.0).abs() < 1e-15 && (r.t - 1.0).abs() < 1e-15);
        assert!(r.nabla.abs() < 1e-15);
    }

    #[test]
    fn scalar_chain() {
        let lat = PeriodicBox::new(1, 4).unwrap();
        let b: f64 = 0.3;
        let gt = vec![b.sqrt(), 0.0, 0.0, 0.0];
        let rec = chain_of_bubbles_x(&lat, &gt).unwrap();
        assert!((rec.psi_mass.unwrap() - b / (1.0 - b)).abs() < 1e-11);
        assert!(rec.holds);
    }

    #[test]
    fn asymmetric_rejected() {
        let mut t = trivial(1, 8);
        t.ghat[1] = 2.0;
        assert!(TwoPointInput::new(1, 8, t.ghat, t.dhat, 0.0, None).is_err());
    }

    #[test]
    fn cos_split_examples() {
        let r = cos_split_check(&[PI / 2.0, PI / 2.0]).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-15 && (r.rhs - 10.0).abs() < 1e-14);
        assert!(cos_split_check(&[0.0, 0.0, 0.0]).unwrap().lhs == 0.0);
    }
}
