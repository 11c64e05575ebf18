//! Ferromagnetic Ising model on a periodic box with folded, range-truncated
//! couplings: exhaustive enumeration, single-spin-flip Metropolis, and the
//! correlation inequalities checked against the enumeration.
//!
//! The box Hamiltonian is H = −Σ_{u<v} J_M(v−u) φ_u φ_v, where J_M folds every
//! coupling J(x) with |x| ≤ R onto its residue; configurations carry weight
//! exp(−zH + hΣφ).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::PeriodicBox;
use crate::rng::{domain, stream_rng};
use crate::stats::{drifts, Estimate, DEFAULT_BATCHES};
use crate::step_dist::{ising_tau, CouplingTable};

/// Largest spin count accepted by the exhaustive oracle.
pub const EXACT_SPIN_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            sweeps: 20_000,
            burn_in: 1_000,
            thinning: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IsingConfig {
    lattice: PeriodicBox,
    couplings: CouplingTable,
    z: f64,
    h: f64,
    r_cut: f64,
    pub sampler: SamplerParams,
    seed: u64,
    replicas: usize,
    /// J_M on the box, indexed by residue.
    folded: Vec<f64>,
    /// Nonzero offsets of J_M.
    offsets: Vec<(usize, f64)>,
    tail_fraction: f64,
}

impl IsingConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lattice: PeriodicBox,
        couplings: &CouplingTable,
        z: f64,
        h: f64,
        r_cut: Option<f64>,
        sampler: SamplerParams,
        seed: u64,
        replicas: usize,
    ) -> Result<Self> {
        let d = lattice.dim();
        if couplings.d != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                got: couplings.d,
            });
        }
        if !(z.is_finite() && z >= 0.0) {
            return Err(LabError::invalid(
                "z",
                "inverse temperature must be finite and nonnegative",
            ));
        }
        if !h.is_finite() {
            return Err(LabError::invalid("h", "field must be finite"));
        }
        if replicas == 0 || sampler.sweeps == 0 || sampler.thinning == 0 {
            return Err(LabError::invalid(
                "sampler",
                "replicas, sweeps and thinning must be positive",
            ));
        }
        check_symmetric(couplings)?;
        let r_cut = r_cut.unwrap_or(f64::INFINITY);
        let r2 = r_cut * r_cut;
        let mut folded = vec![0.0; lattice.num_sites()];
        let (mut kept, mut cut) = (0.0, 0.0);
        for (x, j) in &couplings.entries {
            let t = (z * j).tanh();
            if (x.iter().map(|&c| c * c).sum::<i64>() as f64) <= r2 {
                folded[lattice.index_of(x)] += j;
                kept += t;
            } else {
                cut += t;
            }
        }
        // Self-couplings only shift the energy by a constant.
        folded[0] = 0.0;
        let offsets = folded
            .iter()
            .enumerate()
            .filter(|(_, &j)| j > 0.0)
            .map(|(o, &j)| (o, j))
            .collect();
        let total = kept + cut;
        Ok(Self {
            lattice,
            couplings: couplings.clone(),
            z,
            h,
            r_cut,
            sampler,
            seed,
            replicas,
            folded,
            offsets,
            tail_fraction: if total > 0.0 { cut / total } else { 0.0 },
        })
    }

    pub fn lattice(&self) -> &PeriodicBox {
        &self.lattice
    }

    pub fn couplings(&self) -> &CouplingTable {
        &self.couplings
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn folded(&self) -> &[f64] {
        &self.folded
    }

    /// Share of τ(z) carried by couplings beyond the cutoff.
    pub fn tail_fraction(&self) -> f64 {
        self.tail_fraction
    }

    pub fn with_z(&self, z: f64) -> Result<Self> {
        self.rebuild(&self.couplings, z, self.h)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        self.rebuild(&self.couplings, self.z, h)
    }

    pub fn with_couplings(&self, couplings: &CouplingTable) -> Result<Self> {
        self.rebuild(couplings, self.z, self.h)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn rebuild(&self, j: &CouplingTable, z: f64, h: f64) -> Result<Self> {
        Self::new(
            self.lattice.clone(),
            j,
            z,
            h,
            Some(self.r_cut),
            self.sampler,
            self.seed,
            self.replicas,
        )
    }

    /// Unordered interacting pairs (u < v, J_M(v − u)).
    pub fn pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.lattice.num_sites();
        let mut out = Vec::new();
        for u in 0..n {
            for &(o, j) in &self.offsets {
                let v = self.lattice.add(u, o);
                if u < v {
                    out.push((u, v, j));
                }
            }
        }
        out
    }
}

fn check_symmetric(j: &CouplingTable) -> Result<()> {
    use std::collections::BTreeMap;
    let mut map: BTreeMap<&[i64], f64> = BTreeMap::new();
    for (x, v) in &j.entries {
        *map.entry(x.as_slice()).or_insert(0.0) += v;
    }
    for (x, v) in &map {
        let neg: Vec<i64> = x.iter().map(|c| -c).collect();
        let w = map.get(neg.as_slice()).copied().unwrap_or(0.0);
        if (v - w).abs() > 1e-12 * v.abs().max(1.0) {
            return Err(LabError::invalid("J", "couplings must satisfy J(x) = J(−x)"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinSample {
    /// G(x) = ⟨φ_0 φ_x⟩ for every site x.
    pub g: Vec<f64>,
    pub g_se: Vec<f64>,
    /// Per-site magnetization ⟨(1/N) Σ φ⟩.
    pub magnetization: Estimate,
    /// Σ_x ⟨φ_0 φ_x⟩.
    pub chi: Estimate,
    /// ⟨(Σφ)²⟩ / N, the variance form of the same quantity.
    pub chi_variance: Estimate,
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    pub tail_fraction: f64,
    pub warnings: Vec<String>,
}

/// Exhaustive sum over all 2^N spin configurations.
pub fn exact_ising(config: &IsingConfig) -> Result<SpinSample> {
    let n = config.lattice.num_sites();
    if n > EXACT_SPIN_LIMIT {
        return Err(LabError::SizeGuard {
            what: "exact Ising spin count".into(),
            size: n,
            limit: EXACT_SPIN_LIMIT,
        });
    }
    let pairs = config.pairs();
    let (z, h) = (config.z, config.h);
    let shift = z * pairs.iter().map(|p| p.2).sum::<f64>() + h.abs() * n as f64;
    // Accumulates [Z, Σ w S, Σ w S², Σ w φ_0 φ_x ...].
    let width = 3 + n;
    // Each configuration is paired with its global flip, so odd moments
    // cancel exactly at h = 0.
    let half = 1u32 << (n - 1);
    let chunk = 1u32 << 10.min(n - 1);
    let total: Vec<f64> = (0..half)
        .into_par_iter()
        .step_by(chunk as usize)
        .map(|start| {
            let mut acc = vec![0.0; width];
            for mask in start..start + chunk {
                let spin = |u: usize| if mask >> u & 1 == 1 { 1.0 } else { -1.0 };
                let bonds: f64 = pairs.iter().map(|&(u, v, j)| j * spin(u) * spin(v)).sum();
                let s: f64 = (0..n).map(spin).sum();
                let w = (z * bonds + h * s - shift).exp();
                let wf = (z * bonds - h * s - shift).exp();
                acc[0] += w + wf;
                acc[1] += w * s - wf * s;
                acc[2] += (w + wf) * s * s;
                let s0 = spin(0);
                for x in 0..n {
                    acc[3 + x] += (w + wf) * s0 * spin(x);
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; width], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(p, q)| *p += q);
            a
        });
    let zsum = total[0];
    let g: Vec<f64> = total[3..].iter().map(|v| v / zsum).collect();
    let chi = g.iter().sum();
    Ok(SpinSample {
        g_se: vec![0.0; n],
        g,
        magnetization: Estimate::exact(total[1] / zsum / n as f64),
        chi: Estimate::exact(chi),
        chi_variance: Estimate::exact(total[2] / zsum / n as f64),
        exact: true,
        acceptance_rate: None,
        tail_fraction: config.tail_fraction,
        warnings: Vec::new(),
    })
}

struct ReplicaRun {
    /// Batch means of [m, Σ_x φ_0φ_x, S²/N, φ_0φ_x ...].
    batches: Vec<Vec<f64>>,
    chi_series: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

fn run_replica(config: &IsingConfig, replica: u64, batches: usize) -> ReplicaRun {
    let n = config.lattice.num_sites();
    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|u| {
            config
                .offsets
                .iter()
                .map(|&(o, j)| (config.lattice.add(u, o), j))
                .collect()
        })
        .collect();
    let mut rng = stream_rng(config.seed, domain::ISING, replica);
    let mut spins: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let (z, h) = (config.z, config.h);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let mut sweep = |spins: &mut Vec<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
        for _ in 0..n {
            let u = rng.gen_range(0..n);
            let local: f64 = neighbors[u].iter().map(|&(v, j)| j * spins[v]).sum();
            let delta = -2.0 * spins[u] * (z * local + h);
            proposed += 1;
            if delta >= 0.0 || rng.gen::<f64>() < delta.exp() {
                spins[u] = -spins[u];
                accepted += 1;
            }
        }
    };
    for _ in 0..config.sampler.burn_in {
        sweep(&mut spins, &mut rng);
    }
    let width = 3 + n;
    let count = config.sampler.sweeps / config.sampler.thinning;
    let per_batch = (count / batches).max(1);
    let mut out = Vec::new();
    let mut acc = vec![0.0; width];
    let mut filled = 0;
    let mut chi_series = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..config.sampler.thinning {
            sweep(&mut spins, &mut rng);
        }
        let s: f64 = spins.iter().sum();
        let s0 = spins[0];
        acc[0] += s / n as f64;
        acc[1] += s0 * s;
        acc[2] += s * s / n as f64;
        for x in 0..n {
            acc[3 + x] += s0 * spins[x];
        }
        chi_series.push(s * s / n as f64);
        filled += 1;
        if filled == per_batch {
            out.push(acc.iter().map(|v| v / per_batch as f64).collect());
            acc.iter_mut().for_each(|v| *v = 0.0);
            filled = 0;
        }
    }
    ReplicaRun {
        batches: out,
        chi_series,
        accepted,
        proposed,
    }
}

fn pooled(batches: &[Vec<f64>], i: usize) -> Estimate {
    let b = batches.len();
    let mean = batches.iter().map(|v| v[i]).sum::<f64>() / b as f64;
    let se = if b > 1 {
        let var = batches.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Estimate { mean, se, samples: b }
}

/// Single-spin-flip Metropolis, one sweep being N proposals at uniformly
/// random sites. Replicas run in parallel and are pooled as batches in
/// replica order.
pub fn metropolis(config: &IsingConfig) -> Result<SpinSample> {
    let n = config.lattice.num_sites();
    if config.sampler.sweeps / config.sampler.thinning < 2 {
        return Err(LabError::invalid("sweeps", "need at least two measurements"));
    }
    let per_replica = DEFAULT_BATCHES.div_ceil(config.replicas).max(2);
    let runs: Vec<ReplicaRun> = (0..config.replicas as u64)
        .into_par_iter()
        .map(|r| run_replica(config, r, per_replica))
        .collect();
    let batches: Vec<Vec<f64>> = runs.iter().flat_map(|r| r.batches.iter().cloned()).collect();
    let samples = (config.sampler.sweeps / config.sampler.thinning) * config.replicas;
    let with_samples = |mut e: Estimate| {
        e.samples = samples;
        e
    };
    let g: Vec<Estimate> = (0..n).map(|x| pooled(&batches, 3 + x)).collect();
    let drifting = runs.iter().filter(|r| drifts(&r.chi_series, 4.0)).count();
    let mut warnings = Vec::new();
    if drifting > (config.replicas / 10).max(1) {
        warnings.push(format!(
            "WARNING: {drifting} of {} replicas drift between halves; chain may not be equilibrated",
            config.replicas
        ));
    }
    let (acc, prop) = runs.iter().fold((0, 0), |(a, p), r| (a + r.accepted, p + r.proposed));
    Ok(SpinSample {
        g: g.iter().map(|e| e.mean).collect(),
        g_se: g.iter().map(|e| e.se).collect(),
        magnetization: with_samples(pooled(&batches, 0)),
        chi: with_samples(pooled(&batches, 1)),
        chi_variance: with_samples(pooled(&batches, 2)),
        exact: false,
        acceptance_rate: Some(acc as f64 / prop.max(1) as f64),
        tail_fraction: config.tail_fraction,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauRelationRecord {
    pub tau: f64,
    /// G(x) − δ_{0,x}.
    pub lhs: Vec<f64>,
    /// τ(z)·(D_M ∗ G)(x).
    pub rhs: Vec<f64>,
    /// Allowed statistical slack per site (3 standard errors, zero if exact).
    pub slack: Vec<f64>,
    pub violations: Vec<usize>,
    pub max_excess: f64,
    pub holds: bool,
}

/// Pointwise G(x) − δ ≤ τ(z)(D∗G)(x) with τ, D from the couplings.
pub fn tau_and_g_relation_check(config: &IsingConfig, sample: &SpinSample) -> Result<TauRelationRecord> {
    let lat = &config.lattice;
    let n = lat.num_sites();
    if sample.g.len() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: sample.g.len(),
        });
    }
    let mut d_m = vec![0.0; n];
    let tau = if config.z == 0.0 || config.couplings.total() == 0.0 {
        0.0
    } else {
        let (tau, d) = ising_tau(&config.couplings, config.z)?;
        for (x, w) in &d.entries {
            d_m[lat.index_of(x)] += w;
        }
        tau
    };
    let conv = lat.convolve_direct(&d_m, &sample.g);
    let conv_se = lat.convolve_direct(&d_m, &sample.g_se);
    let lhs: Vec<f64> = (0..n).map(|x| sample.g[x] - if x == 0 { 1.0 } else { 0.0 }).collect();
    let rhs: Vec<f64> = conv.iter().map(|c| tau * c).collect();
    let slack: Vec<f64> = (0..n).map(|x| 3.0 * (sample.g_se[x] + tau * conv_se[x])).collect();
    let excess: Vec<f64> = (0..n).map(|x| lhs[x] - rhs[x] - slack[x]).collect();
    let violations: Vec<usize> = (0..n).filter(|&x| excess[x] > 1e-12).collect();
    Ok(TauRelationRecord {
        tau,
        max_excess: excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        holds: violations.is_empty(),
        lhs,
        rhs,
        slack,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GriffithsRecord {
    pub dz: f64,
    /// min_x [G_{z+dz}(x) − G_z(x)].
    pub min_increment_z: f64,
    /// min over coupling entries and sites of the increment from raising that coupling pair.
    pub min_increment_j: f64,
    pub nonnegative_at_h: bool,
    pub holds: bool,
}

/// Griffiths monotonicity in z and in each coupling, by finite differences.
pub fn griffiths_check(config: &IsingConfig, dz: f64, dj: f64) -> Result<GriffithsRecord> {
    let base = exact_ising(config)?;
    let up = exact_ising(&config.with_z(config.z + dz)?)?;
    let min_z = base
        .g
        .iter()
        .zip(&up.g)
        .map(|(a, b)| b - a)
        .fold(f64::INFINITY, f64::min);
    let mut min_j = f64::INFINITY;
    let entries = &config.couplings.entries;
    for (x, _) in entries {
        let neg: Vec<i64> = x.iter().map(|c| -c).collect();
        let raised = CouplingTable::new(
            config.couplings.d,
            entries
                .iter()
                .map(|(y, j)| (y.clone(), if *y == *x || *y == neg { j + dj } else { *j }))
                .collect(),
        )?;
        let g = exact_ising(&config.with_couplings(&raised)?)?;
        for (a, b) in base.g.iter().zip(&g.g) {
            min_j = min_j.min(b - a);
        }
    }
    let nonneg = config.h < 0.0 || base.g.iter().all(|&v| v >= -1e-14);
    Ok(GriffithsRecord {
        dz,
        min_increment_z: min_z,
        min_increment_j: min_j,
        nonnegative_at_h: nonneg,
        holds: min_z >= -1e-13 && min_j >= -1e-13 && nonneg,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LebowitzRecord {
    pub z: f64,
    pub chi: f64,
    pub dchi_dz: f64,
    /// 2 Σ_y J(y) χ².
    pub bound: f64,
    pub holds: bool,
}

/// dχ/dz ≤ 2ΣJ·χ² at h = 0, with dχ/dz from a central difference.
pub fn lebowitz_check(config: &IsingConfig, dz: f64) -> Result<LebowitzRecord> {
    let cfg = config.with_h(0.0)?;
    let chi = exact_ising(&cfg)?.chi.mean;
    let lo = (cfg.z - dz).max(0.0);
    let hi = cfg.z + dz;
    let d = (exact_ising(&cfg.with_z(hi)?)?.chi.mean - exact_ising(&cfg.with_z(lo)?)?.chi.mean) / (hi - lo);
    let bound = 2.0 * cfg.couplings.total() * chi * chi;
    Ok(LebowitzRecord {
        z: cfg.z,
        chi,
        dchi_dz: d,
        bound,
        holds: d <= bound * (1.0 + 1e-9),
    })
}
