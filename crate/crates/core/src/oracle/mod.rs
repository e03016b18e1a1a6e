//! Brute-force marginal likelihoods on desk-scale models.
//!
//! `β` and `u` are integrated in closed form (orthant by orthant for
//! two-piece normal effects); the scales are integrated on a tensor
//! Gauss–Legendre grid in `xᵢ = ln(σᵢ/s)`, `s² = SSE/(n - p)`, and the shape
//! parameters on Gauss–Legendre nodes in their prior quantile. Truncation
//! level `k` keeps `|xᵢ| ≤ k·w` for panel width `w`; the whole grid is
//! evaluated once and nested truncations are read off as shell sums.

mod integrand;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ReFamily};
use crate::numeric::quad::gauss_legendre_on;
use crate::par::Parallelism;
use integrand::{shape_nodes, BoundKernel, Eval, Kind, Prepared, ShapeNode};

/// Largest model the oracle accepts.
pub const MAX_N: usize = 6;
pub const MAX_P: usize = 2;
pub const MAX_Q: usize = 3;
pub const MAX_R: usize = 2;

/// Node values more than this many log units below the largest bound are
/// dropped before the expensive orthant probabilities.
const PRUNE: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Width of one truncation step in `ln σ`.
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    /// Gauss–Legendre nodes per shape parameter.
    pub shape_nodes: usize,
    /// Nodes per mixing variable `τᵢ` (scale mixtures only).
    pub tau_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            panel_width: 1.5,
            nodes_per_panel: 8,
            shape_nodes: 12,
            tau_nodes: 48,
        }
    }
}

impl GridSpec {
    /// Same truncation geometry with every quadrature step halved.
    pub fn refined(&self) -> Self {
        GridSpec {
            nodes_per_panel: 2 * self.nodes_per_panel,
            shape_nodes: 2 * self.shape_nodes,
            tau_nodes: 2 * self.tau_nodes,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.panel_width > 0.0 && self.panel_width.is_finite())
            || self.nodes_per_panel == 0
            || self.shape_nodes == 0
            || self.tau_nodes == 0
        {
            return Err(Error::Configuration(format!("invalid grid {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleOptions {
    pub grid: GridSpec,
    pub parallelism: Parallelism,
}

/// Truncation level `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRecord {
    pub level: usize,
    /// `[lo, hi]` for `σ₀, σ₁, .., σ_r`.
    pub sigma_bounds: Vec<(f64, f64)>,
    /// `None`: integrated analytically over the whole space.
    pub beta_half_width: Option<f64>,
    pub u_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub value: f64,
    pub ln_value: f64,
    pub truncation: TruncationRecord,
    /// Relative change from the previous truncation level (0 at level 1).
    pub rel_increment: f64,
    pub grid_spec: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeOutcome {
    Converges,
    Diverges,
    Inconclusive,
}

impl std::fmt::Display for ProbeOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProbeOutcome::Converges => "CONVERGES",
            ProbeOutcome::Diverges => "DIVERGES",
            ProbeOutcome::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub k: usize,
    pub value: f64,
    pub ln_value: f64,
    pub rel_increment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeVerdict {
    pub outcome: ProbeOutcome,
    pub increment_trace: Vec<TraceEntry>,
}

impl ProbeVerdict {
    /// `k,value,rel_increment` with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,value,rel_increment\n");
        for e in &self.increment_trace {
            let inc = e.rel_increment.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:e},{}", e.k, e.value, inc);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub steps: usize,
    pub tol: f64,
    /// Minimum growth factor per expansion for divergence.
    pub growth: f64,
    /// Allowed relative dip between consecutive increments for divergence.
    pub slack: f64,
    pub options: OracleOptions,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        ProbeSchedule {
            steps: 8,
            tol: 1e-3,
            growth: 1.01,
            slack: 0.02,
            options: OracleOptions::default(),
        }
    }
}

/// The appendix-style bounds on the truncated marginal of a two-piece normal
/// model: each `c(γ)` in the random-effects exponent replaced by `h(γ)`
/// (lower), `H(γ)` (upper) or `max{a, b}` (tighter upper), with the density
/// constant `2/(σᵢH(γᵢ))` kept, so `lower ≤ m ≤ upper_max ≤ upper` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingIntegrals {
    pub lower: f64,
    pub upper: f64,
    pub upper_max: f64,
    pub ln_lower: f64,
    pub ln_upper: f64,
    pub ln_upper_max: f64,
}

fn check_scale(spec: &ModelSpec) -> Result<()> {
    let (n, p, q, r) = (spec.n(), spec.p(), spec.q(), spec.r());
    if n > MAX_N || p > MAX_P || q > MAX_Q || r > MAX_R {
        return Err(Error::ScaleLimit(format!(
            "oracle handles n ≤ {MAX_N}, p ≤ {MAX_P}, q ≤ {MAX_Q}, r ≤ {MAX_R}; got n={n}, p={p}, q={q}, r={r}"
        )));
    }
    Ok(())
}

struct Axis {
    x: f64,
    ln_w: f64,
    shell: usize,
}

/// Tensor grid over `x = ln(σ/s)` for all `r + 1` scales.
struct Grid {
    dims: usize,
    axis: Vec<Axis>,
    ln_ref: f64,
    levels: usize,
}

impl Grid {
    fn new(dims: usize, levels: usize, spec: &GridSpec, ln_ref: f64) -> Self {
        let w = spec.panel_width;
        let half = levels as f64 * w;
        let mut axis = Vec::new();
        for j in 0..2 * levels {
            let lo = -half + j as f64 * w;
            let shell = if j < levels { levels - j } else { j - levels + 1 };
            for (x, wt) in gauss_legendre_on(spec.nodes_per_panel, lo, lo + w) {
                axis.push(Axis { x, ln_w: wt.ln(), shell });
            }
        }
        Grid {
            dims,
            axis,
            ln_ref,
            levels,
        }
    }

    fn len(&self) -> usize {
        self.axis.len().pow(self.dims as u32)
    }

    /// Scales, summed log-weights with the `dσ = σ dx` Jacobian, and shell.
    fn node(&self, mut idx: usize, sigmas: &mut [f64]) -> (f64, usize) {
        let m = self.axis.len();
        let mut ln_w = 0.0;
        let mut shell = 0;
        for s in sigmas.iter_mut().take(self.dims) {
            let a = &self.axis[idx % m];
            idx /= m;
            let lnsig = self.ln_ref + a.x;
            *s = lnsig.exp();
            ln_w += a.ln_w + lnsig;
            shell = shell.max(a.shell);
        }
        (ln_w, shell)
    }

    /// Per-shell sums of `exp(f)` over the grid, scaled by `exp(-scale)`.
    fn shell_sums<F, B>(&self, par: Parallelism, exact: F, bound: Option<B>) -> ShellSums
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
        B: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let eval = |i: usize, f: &(dyn Fn(&[f64]) -> f64 + Sync)| {
            let mut s = [0.0; MAX_R + 1];
            let (ln_w, _) = self.node(i, &mut s);
            ln_w + f(&s[..self.dims])
        };
        let n = self.len();
        let values: Vec<f64> = match bound {
            None => par.map_range(n, |i| eval(i, &exact)),
            Some(bound) => {
                let ub = par.map_range(n, |i| eval(i, &bound));
                let cut = ub.iter().copied().fold(f64::NEG_INFINITY, f64::max) - PRUNE;
                par.map_range(n, |i| if ub[i] < cut { f64::NEG_INFINITY } else { eval(i, &exact) })
            }
        };
        let scale = values
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sums = vec![0.0; self.levels];
        let mut bad = false;
        let mut s = [0.0; MAX_R + 1];
        for (i, v) in values.iter().enumerate() {
            if v.is_nan() {
                bad = true;
                continue;
            }
            let (_, shell) = self.node(i, &mut s);
            if scale > f64::NEG_INFINITY {
                sums[shell - 1] += (v - scale).exp();
            }
        }
        ShellSums { scale, sums, bad }
    }
}

struct ShellSums {
    scale: f64,
    sums: Vec<f64>,
    bad: bool,
}

impl ShellSums {
    /// `(ln V_k, V_k / V_{k-1} - 1)` for `k = 1..levels`.
    fn cumulative(&self) -> Vec<(f64, Option<f64>)> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.sums.len());
        for &s in &self.sums {
            let inc = if acc > 0.0 { Some(s / acc) } else { None };
            acc += s;
            out.push((self.scale + acc.ln(), inc));
        }
        out
    }
}

struct Setup {
    prep: Prepared,
    kind: Kind,
    nodes: Vec<ShapeNode>,
    ln_ref: f64,
    spec: ModelSpec,
}

impl Setup {
    fn new(spec: &ModelSpec, y: &DVector<f64>, grid: &GridSpec) -> Result<Self> {
        check_scale(spec)?;
        grid.validate()?;
        let prep = Prepared::new(spec, y)?;
        let dof = (spec.n() - spec.p()) as f64;
        if !(prep.sse > 1e-12 * y.norm_squared().max(1e-300)) {
            return Err(Error::Domain("y lies in the column space of X (SSE = 0)".into()));
        }
        let (kind, nodes) = shape_nodes(spec.re_family(), spec.r(), grid.shape_nodes, grid.tau_nodes)?;
        Ok(Setup {
            ln_ref: 0.5 * (prep.sse / dof).ln(),
            prep,
            kind,
            nodes,
            spec: spec.clone(),
        })
    }

    fn ln_prior(&self, sigmas: &[f64]) -> f64 {
        let prior = self.spec.prior();
        sigmas.iter().enumerate().map(|(i, &s)| prior.ln_kernel(i, s)).sum()
    }

    fn integrand(&self, sigmas: &[f64], eval: Eval) -> f64 {
        let lp = self.ln_prior(sigmas);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .map(|nd| nd.ln_weight + self.prep.ln_u_integral(self.kind, sigmas, nd, eval))
            .collect();
        lp + log_sum_exp(&terms)
    }

    fn bound_integrand(&self, sigmas: &[f64], kernel: BoundKernel) -> f64 {
        let lp = self.ln_prior(sigmas);
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .map(|nd| nd.ln_weight + self.prep.ln_bound_integral(sigmas, nd, kernel))
            .collect();
        lp + log_sum_exp(&terms)
    }

    fn grid(&self, levels: usize, spec: &GridSpec) -> Grid {
        Grid::new(self.spec.r() + 1, levels, spec, self.ln_ref)
    }

    fn shells(&self, levels: usize, opts: &OracleOptions) -> Result<ShellSums> {
        let grid = self.grid(levels, &opts.grid);
        let exact = |s: &[f64]| self.integrand(s, Eval::Exact);
        let sums = if self.kind == Kind::Normal {
            grid.shell_sums(opts.parallelism, exact, None::<fn(&[f64]) -> f64>)
        } else {
            grid.shell_sums(opts.parallelism, exact, Some(|s: &[f64]| self.integrand(s, Eval::Bound)))
        };
        if sums.bad {
            return Err(Error::Numerical {
                message: "non-finite integrand value on the oracle grid".into(),
                partial: None,
            });
        }
        Ok(sums)
    }

    fn record(&self, level: usize, grid: &GridSpec) -> TruncationRecord {
        let l = level as f64 * grid.panel_width;
        TruncationRecord {
            level,
            sigma_bounds: vec![((self.ln_ref - l).exp(), (self.ln_ref + l).exp()); self.spec.r() + 1],
            beta_half_width: None,
            u_half_width: None,
        }
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_level(t: Truncation) -> Result<usize> {
    if t.0 == 0 {
        return Err(Error::Configuration("truncation level must be at least 1".into()));
    }
    Ok(t.0)
}

/// Marginal likelihood over the truncated scale box, with default grid.
pub fn marginal_truncated(spec: &ModelSpec, y: &DVector<f64>, truncation: Truncation) -> Result<MarginalEstimate> {
    marginal_truncated_with(spec, y, truncation, &OracleOptions::default())
}

pub fn marginal_truncated_with(
    spec: &ModelSpec,
    y: &DVector<f64>,
    truncation: Truncation,
    opts: &OracleOptions,
) -> Result<MarginalEstimate> {
    let level = check_level(truncation)?;
    let setup = Setup::new(spec, y, &opts.grid)?;
    let cum = setup.shells(level, opts)?.cumulative();
    let (ln_value, inc) = cum[level - 1];
    Ok(MarginalEstimate {
        value: ln_value.exp(),
        ln_value,
        truncation: setup.record(level, &opts.grid),
        rel_increment: inc.unwrap_or(0.0),
        grid_spec: opts.grid,
    })
}

/// Marginal likelihood with normal effects at fixed scales `(σ₀, .., σ_r)`,
/// `β` flat and `u` integrated out:
/// `(2π)^{-(n-p)/2} |V|^{-1/2} |XᵀV⁻¹X|^{-1/2} exp(-yᵀ(V⁻¹ - V⁻¹X(XᵀV⁻¹X)⁻¹XᵀV⁻¹)y/2)`
/// with `V = σ₀²I + Z D Zᵀ`. The family recorded in `spec` is ignored.
pub fn normal_profile_marginal(spec: &ModelSpec, y: &DVector<f64>, sigmas: &[f64]) -> Result<f64> {
    ln_normal_profile_marginal(spec, y, sigmas).map(f64::exp)
}

pub fn ln_normal_profile_marginal(spec: &ModelSpec, y: &DVector<f64>, sigmas: &[f64]) -> Result<f64> {
    spec.check_data(y)?;
    if sigmas.len() != spec.r() + 1 {
        return Err(Error::Dimension(format!(
            "expected {} scales, got {}",
            spec.r() + 1,
            sigmas.len()
        )));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || sigmas[0] <= 0.0 {
        return Err(Error::Domain(format!("scales {sigmas:?} must be positive")));
    }
    Profile::new(spec, y)?.ln_value(sigmas)
}

/// `V` restricted to the residual space: with `B` an orthonormal basis of
/// the complement of `col(X)`, `|V| |XᵀV⁻¹X| = |XᵀX| |BᵀVB|` and the
/// quadratic form is `rᵀ(BᵀVB)⁻¹r`, `r = Bᵀy`. Writing `BᵀVB = σ₀²(I + GGᵀ)`
/// and taking the SVD of `G` keeps both terms accurate at extreme scale
/// ratios, where `I + GGᵀ` is too ill-conditioned to factor.
struct Profile {
    w: DMatrix<f64>,
    r: DVector<f64>,
    ln_det_xtx: f64,
    factor: Vec<usize>,
}

impl Profile {
    fn new(spec: &ModelSpec, y: &DVector<f64>) -> Result<Self> {
        let x = spec.x();
        let b = crate::numeric::linalg::residual_basis(x);
        Ok(Profile {
            w: b.transpose() * spec.z(),
            r: b.transpose() * y,
            ln_det_xtx: crate::numeric::linalg::ln_det_spd(&(x.transpose() * x))?,
            factor: spec.column_factor(),
        })
    }

    fn ln_value(&self, sigmas: &[f64]) -> Result<f64> {
        let m = self.r.len();
        let s0 = sigmas[0];
        let mut wd = self.w.clone();
        for (k, &i) in self.factor.iter().enumerate() {
            wd.column_mut(k).scale_mut(sigmas[i + 1] / s0);
        }
        let svd = wd.svd(true, false);
        let u = svd.u.as_ref().ok_or_else(|| Error::numerical("SVD did not return U"))?;
        let proj = u.transpose() * &self.r;
        let ln_det_a: f64 = svd.singular_values.iter().map(|sv| (sv * sv).ln_1p()).sum();
        let perp = (&self.r - u * &proj).norm_squared();
        let inside: f64 = proj
            .iter()
            .zip(svd.singular_values.iter())
            .map(|(c, sv)| c * c / (1.0 + sv * sv))
            .sum();
        let quad = (perp + inside) / (s0 * s0);
        Ok(-(m as f64) * (crate::numeric::special::LN_SQRT_2PI + s0.ln())
            - 0.5 * self.ln_det_xtx
            - 0.5 * ln_det_a
            - 0.5 * quad)
    }
}

/// Normal-effects marginal likelihood from [`ln_normal_profile_marginal`]
/// integrated against the scale prior on the oracle's σ grid. Whatever
/// family `spec` records, the effects are treated as normal.
pub fn profile_marginal_truncated(
    spec: &ModelSpec,
    y: &DVector<f64>,
    truncation: Truncation,
    opts: &OracleOptions,
) -> Result<MarginalEstimate> {
    let level = check_level(truncation)?;
    check_scale(spec)?;
    opts.grid.validate()?;
    let sse = spec.sse(y)?;
    if !(sse > 1e-12 * y.norm_squared().max(1e-300)) {
        return Err(Error::Domain("y lies in the column space of X (SSE = 0)".into()));
    }
    let ln_ref = 0.5 * (sse / (spec.n() - spec.p()) as f64).ln();
    let grid = Grid::new(spec.r() + 1, level, &opts.grid, ln_ref);
    spec.check_data(y)?;
    let prior = spec.prior();
    let profile = Profile::new(spec, y)?;
    let f = |s: &[f64]| {
        let lp: f64 = s.iter().enumerate().map(|(i, &v)| prior.ln_kernel(i, v)).sum();
        lp + profile.ln_value(s).unwrap_or(f64::NAN)
    };
    let sums = grid.shell_sums(opts.parallelism, f, None::<fn(&[f64]) -> f64>);
    if sums.bad {
        return Err(Error::numerical("non-finite profile marginal on the oracle grid"));
    }
    let (ln_value, inc) = sums.cumulative()[level - 1];
    Ok(MarginalEstimate {
        value: ln_value.exp(),
        ln_value,
        truncation: TruncationRecord {
            level,
            sigma_bounds: vec![
                ((ln_ref - level as f64 * opts.grid.panel_width).exp(), (ln_ref + level as f64 * opts.grid.panel_width).exp());
                spec.r() + 1
            ],
            beta_half_width: None,
            u_half_width: None,
        },
        rel_increment: inc.unwrap_or(0.0),
        grid_spec: opts.grid,
    })
}

/// Evaluates the marginal on `schedule.steps` nested truncations and
/// classifies the growth.
pub fn propriety_probe(spec: &ModelSpec, y: &DVector<f64>, schedule: &ProbeSchedule) -> Result<ProbeVerdict> {
    if schedule.steps < 4 {
        return Err(Error::Configuration("a probe needs at least four steps".into()));
    }
    let setup = Setup::new(spec, y, &schedule.options.grid)?;
    let cum = setup.shells(schedule.steps, &schedule.options)?.cumulative();
    let trace: Vec<TraceEntry> = cum
        .iter()
        .enumerate()
        .map(|(i, &(ln_value, inc))| TraceEntry {
            k: i + 1,
            value: ln_value.exp(),
            ln_value,
            rel_increment: inc,
        })
        .collect();
    Ok(ProbeVerdict {
        outcome: classify(&trace, schedule),
        increment_trace: trace,
    })
}

fn classify(trace: &[TraceEntry], s: &ProbeSchedule) -> ProbeOutcome {
    let k = trace.len();
    let inc: Vec<f64> = trace.iter().map(|e| e.rel_increment.unwrap_or(f64::INFINITY)).collect();
    if inc[k - 2..].iter().all(|&d| d < s.tol) {
        return ProbeOutcome::Converges;
    }
    // absolute increments relative to the final value, to stay in range
    let last = trace[k - 1].ln_value;
    let abs_inc: Vec<f64> = (1..k)
        .map(|j| ((trace[j].ln_value - last).exp()) - ((trace[j - 1].ln_value - last).exp()))
        .collect();
    let growing = inc[k - 3..].iter().all(|&d| 1.0 + d > s.growth);
    let a = &abs_inc[abs_inc.len() - 3..];
    let steady = a.windows(2).all(|w| w[1] >= (1.0 - s.slack) * w[0]);
    if growing && steady {
        ProbeOutcome::Diverges
    } else {
        ProbeOutcome::Inconclusive
    }
}

/// Appendix bounding integrals for two-piece normal effects on the same box.
pub fn bounding_integrals(spec: &ModelSpec, y: &DVector<f64>, truncation: Truncation) -> Result<BoundingIntegrals> {
    bounding_integrals_with(spec, y, truncation, &OracleOptions::default())
}

pub fn bounding_integrals_with(
    spec: &ModelSpec,
    y: &DVector<f64>,
    truncation: Truncation,
    opts: &OracleOptions,
) -> Result<BoundingIntegrals> {
    if !matches!(spec.re_family(), ReFamily::Tpn { .. }) {
        return Err(Error::Configuration(
            "bounding integrals are defined for two-piece normal effects".into(),
        ));
    }
    let level = check_level(truncation)?;
    let setup = Setup::new(spec, y, &opts.grid)?;
    let grid = setup.grid(level, &opts.grid);
    let run = |kernel: BoundKernel| {
        let sums = grid.shell_sums(
            opts.parallelism,
            |s: &[f64]| setup.bound_integrand(s, kernel),
            None::<fn(&[f64]) -> f64>,
        );
        sums.cumulative()[level - 1].0
    };
    let (ln_lower, ln_upper, ln_upper_max) = (run(BoundKernel::Min), run(BoundKernel::Sum), run(BoundKernel::Max));
    Ok(BoundingIntegrals {
        lower: ln_lower.exp(),
        upper: ln_upper.exp(),
        upper_max: ln_upper_max.exp(),
        ln_lower,
        ln_upper,
        ln_upper_max,
    })
}

#[cfg(test)]
mod tests;
