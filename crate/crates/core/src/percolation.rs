//! Bond percolation on periodic boxes with (possibly long-range, truncated)
//! edge probabilities z·D_M(y−x): lazy Monte Carlo cluster growth, exact
//! enumeration of tiny instances, and the differential and magnetization
//! inequalities checked against them.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::PeriodicBox;
use crate::rng::{domain, CounterRng};
use crate::stats::{batch_means, Estimate, DEFAULT_BATCHES};
use crate::step_dist::{DistSpec, StepDistribution};
use crate::torus::fold_onto_box;

/// Largest bond count accepted by the exhaustive oracle.
pub const EXACT_BOND_LIMIT: usize = 20;
/// Largest box for which full connectivity tables are kept.
pub const MATRIX_SITE_LIMIT: usize = 4096;

#[derive(Clone, Debug)]
pub struct PercConfig {
    lattice: PeriodicBox,
    dist: StepDistribution,
    z: f64,
    r_cut: f64,
    seed: u64,
    replicas: usize,
    folded: Vec<f64>,
    /// Distinct nonzero site offsets within range, with their bond probability.
    offsets: Vec<(usize, f64)>,
    clipped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    /// D_M(v − u).
    pub weight: f64,
    pub prob: f64,
}

impl PercConfig {
    pub fn new(
        lattice: PeriodicBox,
        dist: &StepDistribution,
        z: f64,
        r_cut: Option<f64>,
        seed: u64,
        replicas: usize,
    ) -> Result<Self> {
        if lattice.dim() != dist.dim() {
            return Err(LabError::DimensionMismatch {
                expected: dist.dim(),
                got: lattice.dim(),
            });
        }
        let zmax = 1.0 / dist.sup();
        if !(z.is_finite() && z >= 0.0 && z <= zmax * (1.0 + 1e-12)) {
            return Err(LabError::invalid("z", format!("must lie in [0, {zmax}]")));
        }
        let r_cut = r_cut.unwrap_or(f64::INFINITY);
        if r_cut.is_nan() || r_cut < 1.0 {
            return Err(LabError::invalid("R", "range cutoff must be at least 1"));
        }
        if replicas == 0 {
            return Err(LabError::invalid("replicas", "must be positive"));
        }
        let folded = fold_onto_box(dist, &lattice)?;
        let r2 = r_cut * r_cut;
        let mut clipped = false;
        let offsets: Vec<(usize, f64)> = (1..lattice.num_sites())
            .filter(|&o| folded[o] > 0.0 && (lattice.min_image_norm_sq(o) as f64) <= r2)
            .map(|o| {
                let p = z * folded[o];
                if p > 1.0 {
                    clipped = true;
                }
                (o, p.min(1.0))
            })
            .collect();
        Ok(Self {
            lattice,
            dist: dist.clone(),
            z,
            r_cut,
            seed,
            replicas,
            folded,
            offsets,
            clipped,
        })
    }

    pub fn lattice(&self) -> &PeriodicBox {
        &self.lattice
    }

    pub fn dist(&self) -> &StepDistribution {
        &self.dist
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn range(&self) -> f64 {
        self.r_cut
    }

    pub fn folded(&self) -> &[f64] {
        &self.folded
    }

    /// Same instance at another bond parameter.
    pub fn with_z(&self, z: f64) -> Result<Self> {
        Self::new(
            self.lattice.clone(),
            &self.dist,
            z,
            Some(self.r_cut),
            self.seed,
            self.replicas,
        )
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn clipped(&self) -> bool {
        self.clipped
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.clipped {
            w.push(format!(
                "WARNING: z·D_M exceeds 1 for some bonds at z = {}; probabilities clipped to 1",
                self.z
            ));
        }
        w
    }

    /// Σ over in-range offsets of D_M, the torus analogue of Σ_{|v|≤R} D(v).
    pub fn range_mass(&self) -> f64 {
        self.offsets.iter().map(|&(o, _)| self.folded[o]).sum()
    }

    /// e_R = Σ_{|v|>R} D(v) on ℤᵈ.
    pub fn e_r(&self) -> f64 {
        e_r(&self.dist, self.r_cut)
    }

    fn bond_id(&self, u: usize, v: usize) -> u64 {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        (a * self.lattice.num_sites() + b) as u64
    }

    /// Every candidate bond {u, v}, u < v.
    pub fn bonds(&self) -> Vec<Bond> {
        let n = self.lattice.num_sites();
        let mut out = Vec::new();
        for u in 0..n {
            for &(o, p) in &self.offsets {
                let v = self.lattice.add(u, o);
                if u < v {
                    out.push(Bond {
                        u,
                        v,
                        weight: self.folded[o],
                        prob: p,
                    });
                }
            }
        }
        out
    }

    fn is_open(&self, rng: &mut CounterRng, u: usize, v: usize, p: f64) -> bool {
        rng.uniform(self.bond_id(u, v)) < p
    }
}

/// e_R = Σ_{|v|>R} D(v), including any truncated power-law tail.
pub fn e_r(dist: &StepDistribution, r: f64) -> f64 {
    if r.is_infinite() {
        return 0.0;
    }
    let r2 = r * r;
    let inside: f64 = dist
        .support()
        .iter()
        .filter(|(x, _)| x.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() <= r2)
        .map(|(_, w)| w)
        .sum();
    (1.0 - inside).max(0.0)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

/// Grows C(0) for one replica, revealing only bonds incident to reached sites.
/// Returns the member sites in discovery order.
pub fn reveal_cluster(config: &PercConfig, replica: u64) -> Result<Vec<usize>> {
    let n = config.lattice.num_sites();
    let mut rng = CounterRng::new(config.seed, domain::PERCOLATION, replica);
    let mut uf = UnionFind::new(n);
    let mut seen = vec![false; n];
    let mut members = vec![0usize];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &(o, p) in &config.offsets {
            let v = config.lattice.add(u, o);
            if config.is_open(&mut rng, u, v, p) {
                uf.union(u, v);
                if !seen[v] {
                    seen[v] = true;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
    }
    let root = uf.find(0);
    if uf.size[root] != members.len() || members.len() > n {
        return Err(LabError::Internal(format!(
            "cluster bookkeeping mismatch: {} members, union-find size {}",
            members.len(),
            uf.size[root]
        )));
    }
    Ok(members)
}

/// |C(0)| from revealing every bond of the box (same random stream).
pub fn cluster_size_full(config: &PercConfig, replica: u64) -> usize {
    let mut rng = CounterRng::new(config.seed, domain::PERCOLATION, replica);
    let mut uf = UnionFind::new(config.lattice.num_sites());
    for b in config.bonds() {
        if config.is_open(&mut rng, b.u, b.v, b.prob) {
            uf.union(b.u, b.v);
        }
    }
    let r = uf.find(0);
    uf.size[r]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub samples: usize,
    /// (size, count) pairs.
    pub histogram: Vec<(usize, u64)>,
    pub chi: Estimate,
    /// Fraction of samples with |C(0)| > sqrt(sites); a finite-volume proxy for θ.
    pub theta_proxy: Estimate,
    pub theta_cutoff: f64,
    /// P(0 ↔ x) for every site x (small boxes only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity_se: Option<Vec<f64>>,
    pub e_r: f64,
    pub warnings: Vec<String>,
}

impl ClusterStats {
    /// P(|C| = k) for k = 0..=max size.
    pub fn size_distribution(&self) -> Vec<f64> {
        let max = self.histogram.last().map_or(0, |h| h.0);
        let mut p = vec![0.0; max + 1];
        for &(k, c) in &self.histogram {
            p[k] = c as f64 / self.samples as f64;
        }
        p
    }
}

/// Monte Carlo estimate of the cluster law of the origin.
pub fn sample_cluster(config: &PercConfig) -> Result<ClusterStats> {
    let n = config.lattice.num_sites();
    let track = n <= MATRIX_SITE_LIMIT;
    let results: Vec<Result<Vec<usize>>> = (0..config.replicas as u64)
        .into_par_iter()
        .map(|r| reveal_cluster(config, r))
        .collect();
    let mut sizes = Vec::with_capacity(config.replicas);
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut conn = if track { vec![0u64; n] } else { Vec::new() };
    for r in results {
        let members = r?;
        sizes.push(members.len() as f64);
        *hist.entry(members.len()).or_insert(0) += 1;
        if track {
            for &x in &members {
                conn[x] += 1;
            }
        }
    }
    let cutoff = (n as f64).sqrt();
    let big: Vec<f64> = sizes.iter().map(|&s| if s > cutoff { 1.0 } else { 0.0 }).collect();
    let m = sizes.len() as f64;
    let (connectivity, connectivity_se) = if track {
        let p: Vec<f64> = conn.iter().map(|&c| c as f64 / m).collect();
        let se = p.iter().map(|&q| (q * (1.0 - q) / m).sqrt()).collect();
        (Some(p), Some(se))
    } else {
        (None, None)
    };
    Ok(ClusterStats {
        samples: sizes.len(),
        histogram: hist.into_iter().collect(),
        chi: batch_means(&sizes, DEFAULT_BATCHES),
        theta_proxy: batch_means(&big, DEFAULT_BATCHES),
        theta_cutoff: cutoff,
        connectivity,
        connectivity_se,
        e_r: config.e_r(),
        warnings: config.warnings(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactPercolation {
    pub dist: DistSpec,
    pub side: usize,
    pub z: f64,
    pub bonds: Vec<Bond>,
    pub chi: f64,
    /// Coefficients of χ as a polynomial in z (absent when clipping binds).
    pub chi_poly: Option<Vec<f64>>,
    pub dchi_dz: Option<f64>,
    /// P(|C(0)| = k), k = 0..=sites.
    pub size_dist: Vec<f64>,
    pub theta_proxy: f64,
    /// τ(u, v) = P(u ↔ v) for every pair of sites.
    pub connectivity: Vec<Vec<f64>>,
    pub e_r: f64,
    pub range_mass: f64,
}

impl ExactPercolation {
    /// P(|C| ≥ n).
    pub fn tail(&self, n: usize) -> f64 {
        tail_prob(&self.size_dist, n)
    }
}

fn check_exact_size(config: &PercConfig) -> Result<Vec<Bond>> {
    let bonds = config.bonds();
    if bonds.len() > EXACT_BOND_LIMIT {
        return Err(LabError::SizeGuard {
            what: "exact percolation bond set".into(),
            size: bonds.len(),
            limit: EXACT_BOND_LIMIT,
        });
    }
    Ok(bonds)
}

fn components(n: usize, bonds: &[Bond], mask: u32) -> UnionFind {
    let mut uf = UnionFind::new(n);
    for (i, b) in bonds.iter().enumerate() {
        if mask >> i & 1 == 1 {
            uf.union(b.u, b.v);
        }
    }
    uf
}

fn config_prob(bonds: &[Bond], mask: u32, skip: Option<usize>) -> f64 {
    bonds
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, b)| if mask >> i & 1 == 1 { b.prob } else { 1.0 - b.prob })
        .product()
}

/// Exhaustive evaluation over all 2^bonds configurations.
pub fn exact_small(config: &PercConfig) -> Result<ExactPercolation> {
    let bonds = check_exact_size(config)?;
    let n = config.lattice.num_sites();
    let nb = bonds.len();
    let mut size_dist = vec![0.0; n + 1];
    let mut conn = vec![vec![0.0; n]; n];
    let mut poly = vec![0.0; nb + 1];
    let mut chi = 0.0;
    for mask in 0..(1u32 << nb) {
        let mut uf = components(n, &bonds, mask);
        let w = config_prob(&bonds, mask, None);
        let r0 = uf.find(0);
        let s0 = uf.size[r0];
        size_dist[s0] += w;
        chi += w * s0 as f64;
        let roots: Vec<usize> = (0..n).map(|x| uf.find(x)).collect();
        for u in 0..n {
            for v in 0..n {
                if roots[u] == roots[v] {
                    conn[u][v] += w;
                }
            }
        }
        if !config.clipped {
            // s0 · Π_open (w_b z) · Π_closed (1 − w_b z), expanded in z.
            let mut c = vec![0.0; nb + 1];
            let mut open = 0;
            let mut lead = s0 as f64;
            for (i, b) in bonds.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    open += 1;
                    lead *= b.weight;
                }
            }
            c[open] = lead;
            let mut deg = open;
            for (i, b) in bonds.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    for k in (open..=deg).rev() {
                        c[k + 1] -= b.weight * c[k];
                    }
                    deg += 1;
                }
            }
            for (p, v) in poly.iter_mut().zip(&c) {
                *p += v;
            }
        }
    }
    let (chi_poly, dchi_dz) = if config.clipped {
        (None, None)
    } else {
        (Some(poly), Some(class_derivative(n, &bonds)))
    };
    let cutoff = (n as f64).sqrt();
    let theta_proxy = size_dist
        .iter()
        .enumerate()
        .filter(|(k, _)| *k as f64 > cutoff)
        .map(|(_, p)| p)
        .sum();
    Ok(ExactPercolation {
        dist: config.dist.spec(),
        side: config.lattice.side(),
        z: config.z,
        bonds,
        chi,
        chi_poly,
        dchi_dz,
        size_dist,
        theta_proxy,
        connectivity: conn,
        e_r: config.e_r(),
        range_mass: config.range_mass(),
    })
}

/// dχ/dz from the open-bond counts per weight class. With p_c = z·w_c,
/// χ = Σ_k s_k Π_c p_c^{k_c} (1 − p_c)^{B_c − k_c}, which avoids the
/// cancellation of the monomial expansion near p = 1.
fn class_derivative(n: usize, bonds: &[Bond]) -> f64 {
    let mut weights: Vec<f64> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let class_of: Vec<usize> = bonds
        .iter()
        .map(|b| match weights.iter().position(|&w| w == b.weight) {
            Some(c) => {
                counts[c] += 1;
                c
            }
            None => {
                weights.push(b.weight);
                probs.push(b.prob);
                counts.push(1);
                weights.len() - 1
            }
        })
        .collect();
    let mut stride = vec![1usize; counts.len()];
    for c in 1..counts.len() {
        stride[c] = stride[c - 1] * (counts[c - 1] + 1);
    }
    let cells = stride.last().map_or(1, |s| s * (counts.last().unwrap() + 1));
    let mut sums = vec![0.0; cells];
    for mask in 0..(1u32 << bonds.len()) {
        let mut uf = components(n, bonds, mask);
        let r = uf.find(0);
        let idx: usize = (0..bonds.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| stride[class_of[i]])
            .sum();
        sums[idx] += uf.size[r] as f64;
    }
    // f_c(k) = p^k (1 − p)^{B − k} and its z-derivative.
    let tables: Vec<(Vec<f64>, Vec<f64>)> = (0..counts.len())
        .map(|c| {
            let (p, w, b) = (probs[c], weights[c], counts[c] as i32);
            let f = (0..=b).map(|k| p.powi(k) * (1.0 - p).powi(b - k)).collect();
            let df = (0..=b)
                .map(|k| {
                    let up = if k > 0 {
                        k as f64 * p.powi(k - 1) * (1.0 - p).powi(b - k)
                    } else {
                        0.0
                    };
                    let down = if k < b {
                        (b - k) as f64 * p.powi(k) * (1.0 - p).powi(b - k - 1)
                    } else {
                        0.0
                    };
                    w * (up - down)
                })
                .collect();
            (f, df)
        })
        .collect();
    let mut acc = 0.0;
    for (idx, &s) in sums.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let ks: Vec<usize> = (0..counts.len()).map(|c| idx / stride[c] % (counts[c] + 1)).collect();
        let mut d = 0.0;
        for c in 0..counts.len() {
            let mut term = tables[c].1[ks[c]];
            for (c2, t) in tables.iter().enumerate() {
                if c2 != c {
                    term *= t.0[ks[c2]];
                }
            }
            d += term;
        }
        acc += s * d;
    }
    acc
}

/// Evaluates a polynomial with coefficients `c` at `z`.
pub fn poly_eval(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * z + a)
}

/// Σ_b D_b Σ_y P(b pivotal for 0 ↔ y), by enumerating the other bonds.
pub fn russo_sum(config: &PercConfig) -> Result<f64> {
    let bonds = check_exact_size(config)?;
    let n = config.lattice.num_sites();
    let nb = bonds.len();
    let sizes: Vec<u32> = (0..(1u32 << nb))
        .map(|mask| {
            let mut uf = components(n, &bonds, mask);
            let r = uf.find(0);
            uf.size[r] as u32
        })
        .collect();
    let mut total = 0.0;
    for (i, b) in bonds.iter().enumerate() {
        let bit = 1u32 << i;
        let mut s = 0.0;
        for mask in 0..(1u32 << nb) {
            if mask & bit != 0 {
                continue;
            }
            // Σ_y [1(0↔y with b open) − 1(0↔y with b closed)] = |C| difference.
            let gain = sizes[(mask | bit) as usize] as f64 - sizes[mask as usize] as f64;
            if gain != 0.0 {
                s += config_prob(&bonds, mask, Some(i)) * gain;
            }
        }
        total += b.weight * s;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RussoRecord {
    pub z: f64,
    pub chi: f64,
    pub dchi_dz: f64,
    pub russo_sum: f64,
    pub abs_diff: f64,
    pub identity_holds: bool,
    /// Central difference of χ with step dz, from independent enumerations.
    pub finite_difference: f64,
    pub chi_sq: f64,
    pub tree_graph_holds: bool,
    pub nabla: f64,
    /// χ²·Σ_{|v|≤R} D(v) − χ²·∇.
    pub lower_bound: f64,
    pub lower_bound_holds: bool,
}

/// Russo's identity, the tree-graph upper bound, and the triangle lower bound.
pub fn russo_check(config: &PercConfig, exact: &ExactPercolation, dz: f64) -> Result<RussoRecord> {
    let dchi = exact
        .dchi_dz
        .ok_or_else(|| LabError::IllDefined("χ is not polynomial in z when probabilities are clipped".into()))?;
    let russo = russo_sum(config)?;
    let zmax = 1.0 / config.dist.sup();
    let lo = (config.z - dz).max(0.0);
    let hi = (config.z + dz).min(zmax);
    let fd = if hi > lo {
        (exact_small(&config.with_z(hi)?)?.chi - exact_small(&config.with_z(lo)?)?.chi) / (hi - lo)
    } else {
        f64::NAN
    };
    let nabla = restricted_triangle_matrix(config, &exact.connectivity)?;
    let chi = exact.chi;
    let lower = chi * chi * exact.range_mass - chi * chi * nabla;
    let diff = (dchi - russo).abs();
    Ok(RussoRecord {
        z: config.z,
        chi,
        dchi_dz: dchi,
        russo_sum: russo,
        abs_diff: diff,
        identity_holds: diff <= 1e-12,
        finite_difference: fd,
        chi_sq: chi * chi,
        tree_graph_holds: dchi <= chi * chi * (1.0 + 1e-12),
        nabla,
        lower_bound: lower,
        lower_bound_holds: dchi >= lower - 1e-12,
    })
}

/// ∇ = Σ_{|v|≤R} D(v) Σ_{s,t} τ(v,s) τ(s,t) τ(t,0) from a full pair table.
pub fn restricted_triangle_matrix(config: &PercConfig, tau: &[Vec<f64>]) -> Result<f64> {
    let n = config.lattice.num_sites();
    if tau.len() != n || tau.iter().any(|r| r.len() != n) {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: tau.len(),
        });
    }
    let a: Vec<f64> = (0..n).map(|t| tau[t][0]).collect();
    let b: Vec<f64> = (0..n).map(|s| (0..n).map(|t| tau[s][t] * a[t]).sum()).collect();
    let c: Vec<f64> = (0..n).map(|v| (0..n).map(|s| tau[v][s] * b[s]).sum()).collect();
    Ok(config.offsets.iter().map(|&(o, _)| config.folded[o] * c[o]).sum())
}

/// ∇ = (D_R ∗ τ ∗ τ ∗ τ)(0) from a translation-averaged τ(0, x).
pub fn restricted_triangle_translation(config: &PercConfig, tau0: &[f64]) -> Result<f64> {
    let lat = &config.lattice;
    let n = lat.num_sites();
    if tau0.len() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: tau0.len(),
        });
    }
    if n > MATRIX_SITE_LIMIT {
        return Err(LabError::SizeGuard {
            what: "triangle convolution".into(),
            size: n,
            limit: MATRIX_SITE_LIMIT,
        });
    }
    let g2 = lat.convolve_direct(tau0, tau0);
    let g3 = lat.convolve_direct(&g2, tau0);
    Ok(config
        .offsets
        .iter()
        .map(|&(o, _)| config.folded[o] * g3[lat.neg(o)])
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleRecord {
    pub nabla: f64,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Restricted triangle from Monte Carlo connectivities (translation-averaged).
pub fn restricted_triangle(config: &PercConfig, stats: &ClusterStats) -> Result<TriangleRecord> {
    let tau0 = stats.connectivity.as_ref().ok_or_else(|| LabError::SizeGuard {
        what: "connectivity table".into(),
        size: config.lattice.num_sites(),
        limit: MATRIX_SITE_LIMIT,
    })?;
    Ok(TriangleRecord {
        nabla: restricted_triangle_translation(config, tau0)?,
        method: "translation_averaged".into(),
        note: Some("Monte Carlo estimates only give τ(0, x); τ(u, v) = τ(0, v − u) assumed".into()),
    })
}

/// M(z, h) = Σ_k (1 − e^{−kh}) P(|C| = k).
pub fn magnetization(size_dist: &[f64], h: f64) -> f64 {
    size_dist
        .iter()
        .enumerate()
        .map(|(k, &p)| -(-(k as f64) * h).exp_m1() * p)
        .sum()
}

/// P(|C| ≥ n).
pub fn tail_prob(size_dist: &[f64], n: usize) -> f64 {
    size_dist.iter().skip(n).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerChainEntry {
    pub eps: f64,
    /// M(z, ε/n) − (ε/n) Σ_{k=1}^{n−1} P(|C| ≥ k).
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationRecord {
    pub n: usize,
    pub h: f64,
    pub m_h: f64,
    pub tail: f64,
    pub m_inv_n: f64,
    /// (1 − e^{−1})^{−1} M(z, 1/n).
    pub upper: f64,
    pub upper_holds: bool,
    pub lower_chain: Vec<LowerChainEntry>,
}

/// The two-sided comparison between P(|C| ≥ n) and the magnetization.
pub fn magnetization_tail(size_dist: &[f64], n: usize, h: f64, eps: &[f64]) -> Result<MagnetizationRecord> {
    if n == 0 {
        return Err(LabError::invalid("n", "must be positive"));
    }
    let tail = tail_prob(size_dist, n);
    let m_inv_n = magnetization(size_dist, 1.0 / n as f64);
    let upper = m_inv_n / (1.0 - (-1.0f64).exp());
    let partial: f64 = (1..n).map(|k| tail_prob(size_dist, k)).sum();
    let lower_chain = eps
        .iter()
        .map(|&e| {
            let h = e / n as f64;
            let bound = magnetization(size_dist, h) - h * partial;
            LowerChainEntry {
                eps: e,
                bound,
                holds: tail >= bound - 1e-14,
            }
        })
        .collect();
    Ok(MagnetizationRecord {
        n,
        h,
        m_h: magnetization(size_dist, h),
        tail,
        m_inv_n,
        upper,
        upper_holds: tail <= upper + 1e-14,
        lower_chain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(side: usize, z: f64) -> PercConfig {
        let nn = StepDistribution::nearest_neighbor(1).unwrap();
        PercConfig::new(PeriodicBox::new(1, side).unwrap(), &nn, z, None, 1, 100).unwrap()
    }

    #[test]
    fn three_cycle_exact() {
        let e = exact_small(&ring(3, 1.0)).unwrap();
        assert_eq!(e.bonds.len(), 3);
        assert!((e.chi - 2.25).abs() < 1e-15);
        assert!((e.size_dist.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_sites_single_bond() {
        let e = exact_small(&ring(2, 0.3)).unwrap();
        assert_eq!(e.bonds.len(), 1);
        assert_eq!(e.bonds[0].weight, 1.0);
        assert!((e.chi - 1.3).abs() < 1e-15);
        assert!((e.dchi_dz.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn z_bounds_enforced() {
        let nn = StepDistribution::nearest_neighbor(1).unwrap();
        let b = PeriodicBox::new(1, 4).unwrap();
        assert!(PercConfig::new(b.clone(), &nn, 2.5, None, 0, 1).is_err());
        assert!(PercConfig::new(b, &nn, -0.1, None, 0, 1).is_err());
    }

    #[test]
    fn clipping_flagged() {
        let c = ring(2, 1.5);
        assert!(c.clipped());
        assert!(!c.warnings().is_empty());
        assert!(exact_small(&c).unwrap().dchi_dz.is_none());
    }

    #[test]
    fn lazy_and_full_revelation_agree() {
        let nn = StepDistribution::nearest_neighbor(2).unwrap();
        let c = PercConfig::new(PeriodicBox::new(2, 6).unwrap(), &nn, 2.0, None, 11, 1).unwrap();
        for r in 0..200 {
            assert_eq!(reveal_cluster(&c, r).unwrap().len(), cluster_size_full(&c, r));
        }
    }

    #[test]
    fn magnetization_limits() {
        let e = exact_small(&ring(2, 0.4)).unwrap();
        assert_eq!(magnetization(&e.size_dist, 0.0), 0.0);
        assert!((magnetization(&e.size_dist, 1e3) - 1.0).abs() < 1e-15);
    }
}
