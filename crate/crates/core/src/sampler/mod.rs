//! Metropolis-within-Gibbs posterior sampler.
//!
//! β, σ₀ and (for normal, TPN and SMN effects) the σᵢ are drawn exactly.
//! TPN effects are drawn coordinate-wise from their two-piece conditionals;
//! FSN effects and scales use random-walk Metropolis. SMN effects are
//! sampled through their precision multipliers τᵢ. Half-Cauchy scales carry
//! an inverse-gamma auxiliary variable.

pub mod diagnostics;
mod gibbs;
pub mod truncnorm;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    batch_means_se, diagnostics, effective_sample_size, ks_two_sample, split_rhat, DiagnosticsReport,
    ParameterDiagnostic,
};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::par::Parallelism;
use crate::propriety::{self, Overall};

/// Proposal tuning and run-level switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tuning {
    /// Robbins–Monro target for every Metropolis block.
    pub target_accept: f64,
    /// Initial proposal scale multiplier.
    pub initial_step: f64,
    /// Adapt proposal scales during burn-in.
    pub adapt: bool,
    /// Sample even when the propriety check is not PROPER.
    pub allow_improper: bool,
    /// Starting state laid out as in [`ChainOutput::names`].
    pub init: Option<Vec<f64>>,
    /// Hold `σ₀..σ_r` at these values (conditional posterior of the rest).
    pub fixed_scales: Option<Vec<f64>>,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            target_accept: 0.44,
            initial_step: 1.0,
            adapt: true,
            allow_improper: false,
            init: None,
            fixed_scales: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub names: Vec<String>,
    /// One row per retained iteration, columns as in `names`.
    pub draws: Vec<Vec<f64>>,
    pub seed: u64,
    /// Stream index; chain `c` of a run uses stream `c` of `seed`.
    pub chain: u64,
    /// Post-burn-in acceptance rate of each Metropolis block.
    pub acceptance_rates: BTreeMap<String, f64>,
    pub diagnostics: DiagnosticsReport,
}

impl ChainOutput {
    /// Wraps externally produced draws, computing single-chain diagnostics.
    pub fn from_draws(names: Vec<String>, draws: Vec<Vec<f64>>, seed: u64, chain: u64) -> Result<Self> {
        if draws.iter().any(|d| d.len() != names.len()) {
            return Err(Error::Dimension(format!("every draw needs {} values", names.len())));
        }
        let mut out = ChainOutput {
            names,
            draws,
            seed,
            chain,
            acceptance_rates: BTreeMap::new(),
            diagnostics: DiagnosticsReport::default(),
        };
        out.diagnostics = diagnostics(std::slice::from_ref(&out))?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.index_of(name)?;
        Some(self.draws.iter().map(|d| d[j]).collect())
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        Some(c.iter().sum::<f64>() / c.len() as f64)
    }

    /// Header row of names, then one row per draw.
    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for row in &self.draws {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }
}

fn gate(spec: &ModelSpec, y: &DVector<f64>, tuning: &Tuning) -> Result<()> {
    if tuning.allow_improper || tuning.fixed_scales.is_some() {
        return Ok(());
    }
    let verdict = propriety::check(spec, Some(y))?;
    if verdict.overall != Overall::Proper {
        return Err(Error::ProprietyGate(format!(
            "posterior propriety verdict is {} ({:?}); set allow_improper to sample anyway",
            verdict.overall, verdict.theorem_case
        )));
    }
    Ok(())
}

/// Runs one chain (stream 0 of `seed`), keeping `iterations - burn_in`
/// draws.
pub fn mwg_sample(
    spec: &ModelSpec,
    y: &DVector<f64>,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    tuning: &Tuning,
) -> Result<ChainOutput> {
    gate(spec, y, tuning)?;
    gibbs::run(spec, y, iterations, burn_in, seed, 0, tuning)
}

/// Runs `chains` independent chains on streams `0..chains` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn run_chains(
    spec: &ModelSpec,
    y: &DVector<f64>,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    chains: usize,
    tuning: &Tuning,
    parallelism: Parallelism,
) -> Result<Vec<ChainOutput>> {
    gate(spec, y, tuning)?;
    parallelism
        .map_range(chains, |c| gibbs::run(spec, y, iterations, burn_in, seed, c as u64, tuning))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests;
