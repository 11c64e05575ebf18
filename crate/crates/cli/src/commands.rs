//! Subcommand arguments and their handlers.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use lacelab::diagnostics::{diagram_report, infrared_check, TwoPointInput};
use lacelab::ising::{
    exact_ising, griffiths_check, lebowitz_check, metropolis, tau_and_g_relation_check, IsingConfig, SamplerParams,
    EXACT_SPIN_LIMIT,
};
use lacelab::percolation::{
    exact_small, magnetization_tail, restricted_triangle, russo_check, sample_cluster, PercConfig, EXACT_BOND_LIMIT,
};
use lacelab::quadrature::DualGrid;
use lacelab::random_walk::{
    beta_kspace, beta_scaling_table, beta_xspace, cauchy_ratio, thresholds, RefinementPoint, Sweep,
    CAUCHY_RATIO_THRESHOLD,
};
use lacelab::saw::{chi_series, enumerate, estimate_zc, extract_lace, lace_summary, EnumConfig, Mode};
use lacelab::step_dist::{verify_conditions, CouplingTable, DistSpec};
use lacelab::{LabError, PeriodicBox, Result, StepDistribution, TorusGrid};
use serde::Serialize;
use serde_json::{json, Value};

use crate::acceptance;
use crate::output::{Check, Document, Row};

/// A finished run: the document plus an optional plot-data table.
pub struct Run {
    pub doc: Document,
    pub table: Option<Vec<Row>>,
    /// Human-readable lines for stderr.
    pub log: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check the infrared and moment conditions of a step distribution.
    DistCheck(DistCheckArgs),
    /// Random-walk diagram β on a sequence of torus sizes.
    RwBeta(RwBetaArgs),
    /// Scaled β across dimensions or ranges (CSV columns: x = d or L, y = scaled β, yerr = refinement change).
    BetaTable(BetaTableArgs),
    /// Exact self-avoiding walk enumeration and lace coefficients (CSV: x = z, y = χ, yerr = tail estimate).
    Saw(SawArgs),
    /// Bond percolation on a torus (CSV: x = z, y = χ, yerr = standard error).
    Perc(PercArgs),
    /// Ising model on a torus (CSV: x = z, y = χ, yerr = standard error).
    Ising(IsingArgs),
    /// Diagrams, bootstrap functions and inequality checks for a two-point function.
    Diag(DiagArgs),
    /// Infrared-bound ratio of a two-point function.
    Infrared(InfraredArgs),
    /// Run the acceptance suite.
    Acceptance(AcceptanceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DistCheck(_) => "dist-check",
            Command::RwBeta(_) => "rw-beta",
            Command::BetaTable(_) => "beta-table",
            Command::Saw(_) => "saw",
            Command::Perc(_) => "perc",
            Command::Ising(_) => "ising",
            Command::Diag(_) => "diag",
            Command::Infrared(_) => "infrared",
            Command::Acceptance(_) => "acceptance",
        }
    }

    pub fn execute(&self) -> Result<Run> {
        let params = serde_json::to_value(self).map_err(|e| LabError::Internal(e.to_string()))?;
        let params = params
            .as_object()
            .and_then(|o| o.values().next().cloned())
            .unwrap_or(Value::Null);
        let name = self.name();
        let (doc, table) = match self {
            Command::DistCheck(a) => (dist_check(a)?, None),
            Command::RwBeta(a) => (rw_beta(a)?, None),
            Command::BetaTable(a) => beta_table(a)?,
            Command::Saw(a) => saw(a)?,
            Command::Perc(a) => perc(a)?,
            Command::Ising(a) => ising(a)?,
            Command::Diag(a) => (diag(a)?, None),
            Command::Infrared(a) => (infrared(a)?, None),
            Command::Acceptance(a) => return acceptance_run(a, params),
        };
        let Partial {
            seed,
            uncertainty,
            result,
            checks,
        } = doc;
        Ok(Run {
            doc: Document::new(name, seed, params, uncertainty, result, checks),
            table,
            log: Vec::new(),
        })
    }
}

struct Partial {
    seed: Option<u64>,
    uncertainty: &'static str,
    result: Value,
    checks: Vec<Check>,
}

fn to_json(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| LabError::Internal(e.to_string()))
}

/// A step distribution given as JSON or through individual flags.
#[derive(Args, Debug, Clone, Serialize)]
pub struct DistArgs {
    /// Full distribution as JSON, e.g. {"family":"uniform","d":2,"L":3}.
    #[arg(long, conflicts_with_all = ["family", "alpha", "truncation"])]
    pub dist: Option<String>,
    /// nn | uniform | power.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Support radius for the power-law family.
    #[arg(long)]
    pub truncation: Option<f64>,
}

impl DistArgs {
    pub fn spec(&self) -> Result<DistSpec> {
        if let Some(text) = &self.dist {
            return serde_json::from_str(text).map_err(|e| LabError::invalid("dist", e.to_string()));
        }
        let family = self
            .family
            .as_ref()
            .ok_or_else(|| LabError::invalid("family", "give --family or --dist"))?;
        let family = serde_json::from_value(Value::String(family.clone()))
            .map_err(|_| LabError::invalid("family", format!("unknown family `{family}`")))?;
        let d = self.d.ok_or_else(|| LabError::invalid("d", "required"))?;
        Ok(DistSpec {
            family,
            d,
            l: self.l,
            alpha: self.alpha,
            truncation: self.truncation,
        })
    }

    pub fn build(&self) -> Result<StepDistribution> {
        self.spec()?.build()
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DistCheckArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    /// Dual-grid resolution per axis.
    #[arg(long, default_value_t = 16)]
    pub grid_res: usize,
    /// Offset of the probe exponents in the moment table.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

fn dist_check(a: &DistCheckArgs) -> Result<Partial> {
    let dist = a.dist.build()?;
    let report = verify_conditions(&dist, a.grid_res, a.eps)?;
    let detail = report
        .violations
        .iter()
        .map(|v| format!("{} = {:.3e} at {:?}", v.condition, v.value, v.k))
        .collect::<Vec<_>>()
        .join("; ");
    let checks = vec![Check::new("conditions", report.passed, detail)];
    Ok(Partial {
        seed: None,
        uncertainty: "truncation bound",
        result: to_json(&report)?,
        checks,
    })
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RwBetaArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    /// Power of the Green's function in the diagram.
    #[arg(long, default_value_t = 2)]
    pub s: u32,
    /// Torus sides, comma separated.
    #[arg(long = "M", value_delimiter = ',', default_value = "16,32,64")]
    #[serde(rename = "M")]
    pub m: Vec<usize>,
}

#[derive(Serialize)]
struct BetaSequence {
    dist: DistSpec,
    s: u32,
    sequence: Vec<RefinementPoint>,
    /// x-space value on the first grid, when small enough.
    beta_xspace: Option<f64>,
    xspace_note: Option<String>,
    cauchy_ratio: Option<f64>,
    divergent: Option<bool>,
    converged: bool,
    integrability_threshold: f64,
    finite_on_lattice: bool,
}

fn rw_beta(a: &RwBetaArgs) -> Result<Partial> {
    let dist = a.dist.build()?;
    if a.m.is_empty() {
        return Err(LabError::invalid("M", "at least one side is required"));
    }
    let sequence =
        a.m.iter()
            .map(|&m| {
                Ok(RefinementPoint {
                    m,
                    beta: beta_kspace(&DualGrid::new(&dist, m)?, a.s),
                })
            })
            .collect::<Result<Vec<_>>>()?;
    let (beta_x, note) = match beta_xspace(&dist, &TorusGrid::new(dist.dim(), a.m[0])?, a.s) {
        Ok(v) => (Some(v), None),
        Err(LabError::SizeGuard { size, limit, .. }) => (None, Some(format!("skipped: work {size} above {limit}"))),
        Err(e) => return Err(e),
    };
    let ratio = Some(cauchy_ratio(&sequence)).filter(|r| !r.is_nan());
    let divergent = ratio.map(|r| !r.is_finite() || r >= CAUCHY_RATIO_THRESHOLD);
    let th = thresholds(&dist, a.s);
    let converged = match sequence.as_slice() {
        [.., p, q] => divergent != Some(true) && (q.beta - p.beta).abs() <= 1e-6 * q.beta.abs().max(1.0),
        _ => false,
    };
    let mut checks = Vec::new();
    if let Some(div) = divergent {
        checks.push(Check::new(
            "divergence_matches_threshold",
            div == !th.finite,
            format!(
                "refinement ratio {:.3}, d > (alpha ∧ 2)s: {}",
                ratio.unwrap_or(f64::NAN),
                th.finite
            ),
        ));
    }
    if let Some(x) = beta_x {
        let k = sequence[0].beta;
        let gap = (k - x).abs() / k.abs().max(1.0);
        checks.push(Check::new(
            "kspace_equals_xspace",
            gap <= 1e-9,
            format!("relative gap {gap:.2e}"),
        ));
    }
    let result = BetaSequence {
        dist: dist.spec(),
        s: a.s,
        sequence,
        beta_xspace: beta_x,
        xspace_note: note,
        cauchy_ratio: ratio,
        divergent,
        converged,
        integrability_threshold: th.integrability,
        finite_on_lattice: th.finite,
    };
    Ok(Partial {
        seed: None,
        uncertainty: "truncation bound",
        result: to_json(result)?,
        checks,
    })
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BetaTableArgs {
    /// Nearest-neighbor sweep over these dimensions.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["d", "ranges"])]
    pub dims: Vec<usize>,
    /// Dimension for a range sweep.
    #[arg(long, requires = "ranges")]
    pub d: Option<usize>,
    /// Ranges L for a spread-out sweep, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    #[serde(rename = "L")]
    pub ranges: Vec<u32>,
    /// Power-law exponent; the sweep uses the uniform family when absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub s: u32,
}

fn beta_table(a: &BetaTableArgs) -> Result<(Partial, Option<Vec<Row>>)> {
    let sweep = if !a.dims.is_empty() {
        Sweep::Dimensions { dims: a.dims.clone() }
    } else {
        let d =
            a.d.ok_or_else(|| LabError::invalid("dims", "give --dims or --d with --L"))?;
        if a.ranges.is_empty() {
            return Err(LabError::invalid("L", "at least one range is required"));
        }
        match a.alpha {
            Some(alpha) => Sweep::PowerLawRanges {
                d,
                alpha,
                ls: a.ranges.clone(),
            },
            None => Sweep::UniformRanges {
                d,
                ls: a.ranges.clone(),
            },
        }
    };
    let table = beta_scaling_table(&sweep, a.s)?;
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let n = r.beta_sequence.len();
            let change = (r.beta_sequence[n - 1] - r.beta_sequence[n - 2]).abs();
            Row {
                x: r.param,
                y: r.scaled,
                yerr: change * r.scaled / r.beta,
                note: if r.divergent { "divergent".into() } else { String::new() },
            }
        })
        .collect();
    let partial = Partial {
        seed: None,
        uncertainty: "truncation bound",
        result: to_json(&table)?,
        checks: Vec::new(),
    };
    Ok((partial, Some(rows)))
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Rational,
    Double,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SawArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value_t = 8)]
    pub nmax: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Rational)]
    pub mode: ModeArg,
    /// Activities at which to sum the susceptibility series.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
    /// Override of the per-dimension length cap.
    #[arg(long)]
    pub budget: Option<usize>,
}

fn saw(a: &SawArgs) -> Result<(Partial, Option<Vec<Row>>)> {
    let dist = a.dist.build()?;
    let mode = match a.mode {
        ModeArg::Rational => Mode::Rational,
        ModeArg::Double => Mode::Double,
    };
    let mut config = EnumConfig::new(dist.dim(), a.nmax, mode);
    if let Some(b) = a.budget {
        config = config.with_budget(b);
    }
    let series = enumerate(&dist, &config)?;
    let totals = series.totals();
    let counts: Option<Vec<i128>> = (0..=a.nmax).map(|n| series.walk_count(n)).collect();
    let chi =
        a.z.iter()
            .map(|&z| chi_series(&series, z))
            .collect::<Result<Vec<_>>>()?;
    let lace = extract_lace(&series)?;
    let recon = lace.reconstruct(&series)?;
    let exact_ok = match mode {
        Mode::Rational => recon.exact,
        Mode::Double => recon.max_abs_error <= 1e-12,
    };
    let checks = vec![Check::new(
        "lace_reconstruction",
        exact_ok,
        format!("{} mismatches, max error {:.2e}", recon.mismatches, recon.max_abs_error),
    )];
    let rows = chi
        .iter()
        .map(|c| Row {
            x: c.z,
            y: c.value,
            yerr: c.remainder,
            note: c.warnings.join("; "),
        })
        .collect::<Vec<_>>();
    let result = json!({
        "dist": dist.spec(),
        "n_max": a.nmax,
        "weight_loss": series.weight_loss(),
        "totals": totals,
        "walk_counts": counts.map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
        "zc": estimate_zc(&totals),
        "chi": chi,
        "lace": lace_summary(&lace),
        "reconstruction": recon,
    });
    let partial = Partial {
        seed: None,
        uncertainty: match mode {
            Mode::Rational => "exact",
            Mode::Double => "truncation bound",
        },
        result,
        checks,
    };
    Ok((partial, (!rows.is_empty()).then_some(rows)))
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PercArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    /// Bond parameters, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub z: Vec<f64>,
    /// Torus side.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: usize,
    /// Bond range cutoff.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
}

fn perc(a: &PercArgs) -> Result<(Partial, Option<Vec<Row>>)> {
    let dist = a.dist.build()?;
    let base = PercConfig::new(
        PeriodicBox::new(dist.dim(), a.m)?,
        &dist,
        a.z[0],
        a.r,
        a.seed,
        a.replicas,
    )?;
    let mut points = Vec::new();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &z in &a.z {
        let c = base.with_z(z)?;
        let mc = sample_cluster(&c)?;
        let triangle = restricted_triangle(&c, &mc)?;
        let mut entry = json!({ "z": z, "warnings": c.warnings(), "monte_carlo": mc, "triangle": triangle });
        if c.bonds().len() <= EXACT_BOND_LIMIT {
            let exact = exact_small(&c)?;
            let russo = russo_check(&c, &exact, 1e-5)?;
            checks.push(Check::new(
                format!("russo_identity z={z}"),
                russo.identity_holds,
                format!("gap {:.2e}", russo.abs_diff),
            ));
            checks.push(Check::new(
                format!("tree_graph_bound z={z}"),
                russo.tree_graph_holds,
                format!("dchi/dz {:.6} vs chi^2 {:.6}", russo.dchi_dz, russo.chi_sq),
            ));
            let mags = [2usize, 3]
                .iter()
                .map(|&n| magnetization_tail(&exact.size_dist, n, 1.0 / n as f64, &[0.5, 1.0]))
                .collect::<Result<Vec<_>>>()?;
            for m in &mags {
                checks.push(Check::new(
                    format!("magnetization_upper n={} z={z}", m.n),
                    m.upper_holds,
                    format!("P(|C| >= {}) = {:.6} vs {:.6}", m.n, m.tail, m.upper),
                ));
            }
            entry["exact"] = json!({
                "chi": exact.chi,
                "dchi_dz": exact.dchi_dz,
                "size_distribution": exact.size_dist,
                "theta_proxy": exact.theta_proxy,
            });
            entry["russo"] = to_json(&russo)?;
            entry["magnetization"] = to_json(&mags)?;
        }
        rows.push(Row {
            x: z,
            y: mc.chi.mean,
            yerr: mc.chi.se,
            note: String::new(),
        });
        points.push(entry);
    }
    let partial = Partial {
        seed: Some(a.seed),
        uncertainty: "standard error",
        result: json!({ "dist": dist.spec(), "side": a.m, "range": base.range(), "points": points }),
        checks,
    };
    Ok((partial, (rows.len() > 1).then_some(rows)))
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IsingArgs {
    /// Coupling table as JSON: {"d":1,"entries":[[[1],0.5],[[-1],0.5]]}.
    #[arg(long = "J-spec")]
    #[serde(rename = "J-spec")]
    pub j_spec: Option<String>,
    /// Couplings J = strength·D when built from a step distribution.
    #[arg(long = "J-strength", default_value_t = 1.0)]
    #[serde(rename = "J-strength")]
    pub j_strength: f64,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Inverse temperatures, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub z: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    /// Torus side.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: usize,
    /// Coupling range cutoff.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thinning: usize,
    #[arg(long, default_value_t = 4)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
}

fn ising(a: &IsingArgs) -> Result<(Partial, Option<Vec<Row>>)> {
    let couplings = match &a.j_spec {
        Some(text) => serde_json::from_str::<CouplingTable>(text)
            .map_err(|e| LabError::invalid("J-spec", e.to_string()))
            .and_then(|t| CouplingTable::new(t.d, t.entries))?,
        None => CouplingTable::from_distribution(&a.dist.build()?, a.j_strength)?,
    };
    let sampler = SamplerParams {
        sweeps: a.sweeps,
        burn_in: a.burn_in,
        thinning: a.thinning,
    };
    let lattice = PeriodicBox::new(couplings.d, a.m)?;
    let small = lattice.num_sites() <= EXACT_SPIN_LIMIT;
    let base = IsingConfig::new(lattice, &couplings, a.z[0], a.h, a.r, sampler, a.seed, a.replicas)?;
    let mut points = Vec::new();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &z in &a.z {
        let c = base.with_z(z)?;
        let mc = metropolis(&c)?;
        let mut entry = json!({ "z": z, "metropolis": mc });
        let reference = if small { exact_ising(&c)? } else { mc.clone() };
        let step = tau_and_g_relation_check(&c, &reference)?;
        checks.push(Check::new(
            format!("single_step_bound z={z}"),
            step.holds,
            format!(
                "{} sites above the bound, max excess {:.2e}",
                step.violations.len(),
                step.max_excess
            ),
        ));
        entry["single_step"] = to_json(&step)?;
        if small {
            let griffiths = griffiths_check(&c, 1e-4, 1e-4)?;
            checks.push(Check::new(
                format!("griffiths z={z}"),
                griffiths.holds,
                format!(
                    "min increments {:.2e}, {:.2e}",
                    griffiths.min_increment_z, griffiths.min_increment_j
                ),
            ));
            entry["griffiths"] = to_json(&griffiths)?;
            if a.h == 0.0 {
                let leb = lebowitz_check(&c, 1e-4)?;
                checks.push(Check::new(
                    format!("lebowitz z={z}"),
                    leb.holds,
                    format!("dchi/dz {:.6} vs {:.6}", leb.dchi_dz, leb.bound),
                ));
                entry["lebowitz"] = to_json(&leb)?;
            }
            entry["exact"] = to_json(&reference)?;
        }
        rows.push(Row {
            x: z,
            y: mc.chi_variance.mean,
            yerr: mc.chi_variance.se,
            note: String::new(),
        });
        points.push(entry);
    }
    let partial = Partial {
        seed: Some(a.seed),
        uncertainty: "standard error",
        result: json!({ "couplings": couplings, "side": a.m, "h": a.h, "tail_fraction": base.tail_fraction(), "points": points }),
        checks,
    };
    Ok((partial, (rows.len() > 1).then_some(rows)))
}

/// A two-point function from a file or the free model.
#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// Two-point input JSON with d, M, ghat, dhat, tau and optional ghat_se.
    #[arg(long, conflicts_with = "free")]
    pub input: Option<PathBuf>,
    /// Use the random-walk Green's function of the given distribution.
    #[arg(long)]
    pub free: bool,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Torus side for the free model.
    #[arg(long = "M", default_value_t = 16)]
    #[serde(rename = "M")]
    pub m: usize,
}

impl InputArgs {
    fn read_file(&self) -> Result<Option<TwoPointInput>> {
        let Some(path) = &self.input else { return Ok(None) };
        let text = std::fs::read_to_string(path).map_err(|e| LabError::invalid("input", e.to_string()))?;
        let raw: TwoPointInput = serde_json::from_str(&text).map_err(|e| LabError::invalid("input", e.to_string()))?;
        TwoPointInput::new(raw.d, raw.m, raw.ghat, raw.dhat, raw.tau, raw.ghat_se).map(Some)
    }

    fn free_at(&self, z: f64) -> Result<TwoPointInput> {
        if !self.free {
            return Err(LabError::invalid("input", "give --input or --free"));
        }
        TwoPointInput::free(&self.dist.build()?, self.m, z)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DiagArgs {
    #[command(flatten)]
    pub source: InputArgs,
    /// Activity for the free model.
    #[arg(long, default_value_t = 0.5)]
    pub z: f64,
    /// Bootstrap constant; max(f1, f2, f3, 1) when absent.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<f64>,
}

fn diag(a: &DiagArgs) -> Result<Partial> {
    let input = match a.source.read_file()? {
        Some(i) => i,
        None => a.source.free_at(a.z)?,
    };
    let r = diagram_report(&input, a.k)?;
    let mut checks = vec![
        Check::new(
            "open_bubble",
            r.open_bubble.holds,
            format!("max open {:.6} vs {:.6}", r.open_bubble.max_open, r.open_bubble.b),
        ),
        Check::new(
            "b_tilde_bound",
            r.b_tilde_bound.holds,
            format!("{:.6} vs {:.6}", r.b_tilde_bound.b_tilde, r.b_tilde_bound.first),
        ),
        Check::new(
            "cos_g_bound",
            r.cos_g_holds_within_noise,
            format!("worst ratio {:.4}", r.cos_g_worst_ratio),
        ),
        Check::new(
            "c_lambda_identity",
            r.identity.holds,
            format!("range [{:.4}, {:.4}]", r.identity.min, r.identity.max),
        ),
    ];
    if r.chain.converged {
        checks.push(Check::new(
            "chain_of_bubbles",
            r.chain.holds,
            format!("{:?} vs {:.6}", r.chain.psi_mass, r.chain.bound),
        ));
    }
    Ok(Partial {
        seed: None,
        uncertainty: if input.ghat_se.is_some() {
            "standard error"
        } else {
            "exact"
        },
        result: to_json(&r)?,
        checks,
    })
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InfraredArgs {
    #[command(flatten)]
    pub source: InputArgs,
    /// Activities for the free model, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub z: Vec<f64>,
}

fn infrared(a: &InfraredArgs) -> Result<Partial> {
    if let Some(input) = a.source.read_file()? {
        return Ok(Partial {
            seed: None,
            uncertainty: if input.ghat_se.is_some() {
                "standard error"
            } else {
                "exact"
            },
            result: to_json(infrared_check(&input))?,
            checks: Vec::new(),
        });
    }
    let mut records = Vec::new();
    let mut checks = Vec::new();
    for &z in &a.z {
        let rec = infrared_check(&a.source.free_at(z)?);
        checks.push(Check::new(
            format!("free_identity z={z}"),
            rec.sup_deviation <= 1e-12,
            format!("sup deviation {:.2e}", rec.sup_deviation),
        ));
        records.push(json!({ "z": z, "record": rec }));
    }
    Ok(Partial {
        seed: None,
        uncertainty: "exact",
        result: Value::Array(records),
        checks,
    })
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AcceptanceArgs {
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
}

fn acceptance_run(a: &AcceptanceArgs, params: Value) -> Result<Run> {
    let outcomes: Vec<acceptance::Outcome> = acceptance::criteria()
        .iter()
        .filter(|c| a.only.is_empty() || a.only.contains(&c.id))
        .map(|c| c.run())
        .collect();
    let checks = outcomes
        .iter()
        .map(|o| Check::new(format!("criterion {}: {}", o.id, o.title), o.passed, o.detail.clone()))
        .collect();
    let timings: Vec<Value> = outcomes
        .iter()
        .map(|o| json!({ "id": o.id, "seconds": o.seconds, "limit_seconds": o.limit_seconds }))
        .collect();
    let log = outcomes.iter().map(|o| o.line()).collect();
    let mut doc = Document::new("acceptance", None, params, "exact", to_json(&outcomes)?, checks);
    doc.metadata = json!({ "timings": timings });
    Ok(Run { doc, table: None, log })
}
