//! Numerical check that SMN Bayes factors do not depend on the data: for
//! each dataset the oracle's SMN marginal divided by the normal-effects
//! marginal should equal [`smn_constant`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::smn::smn_constant;
use crate::distributions::MixingDistribution;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, PriorStructure, ReFamily, ShapePrior};
use crate::oracle::{marginal_truncated_with, profile_marginal_truncated, OracleOptions, Truncation};
use crate::par::Parallelism;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmnModel {
    pub mixing: MixingDistribution,
    pub delta_prior: ShapePrior,
}

impl SmnModel {
    fn label(&self) -> String {
        format!("{}({:?})", self.mixing.name(), self.delta_prior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOptions {
    pub truncation: Truncation,
    pub oracle: OracleOptions,
    /// Largest acceptable relative increment at the final truncation.
    pub convergence_tol: f64,
    /// Datasets processed concurrently.
    pub parallelism: Parallelism,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        Self {
            truncation: Truncation(8),
            oracle: OracleOptions {
                parallelism: Parallelism::Sequential,
                ..OracleOptions::default()
            },
            convergence_tol: 1e-3,
            parallelism: Parallelism::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub dataset: usize,
    pub model: String,
    pub ln_m_smn: f64,
    pub ln_m_normal: f64,
    pub ratio: f64,
    pub constant: f64,
    /// `ratio / constant - 1`.
    pub deviation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfEntry {
    pub dataset: usize,
    /// `m̃₁(y) / m̃₂(y)`.
    pub bayes_factor: f64,
    /// `c₁ / c₂`, the data-free prediction.
    pub predicted: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub ratios: Vec<RatioEntry>,
    pub bayes_factors: Vec<BfEntry>,
    pub max_ratio_deviation: f64,
    /// Largest relative spread of the Bayes factor across datasets.
    pub max_bf_deviation: f64,
    /// `false` when some oracle run had not converged at the truncation used.
    pub complete: bool,
    pub notes: Vec<String>,
}

fn a_list(spec: &ModelSpec) -> Result<Vec<crate::model::Hyper>> {
    match spec.prior() {
        PriorStructure::PowerExp { a, b } => {
            if b[1..].iter().any(|v| !v.is_zero()) {
                return Err(Error::Configuration(
                    "the factorisation needs b₁ = .. = b_r = 0".into(),
                ));
            }
            Ok(a[1..].to_vec())
        }
        PriorStructure::HalfCauchy { .. } => Err(Error::Configuration(
            "the factorisation needs the power-exponential scale prior".into(),
        )),
    }
}

/// Ratios `m̃(y)/m_N(y)` for every dataset and both SMN models, and the
/// resulting Bayes factors between the models.
pub fn smn_bf_invariance_demo(
    spec: &ModelSpec,
    datasets: &[DVector<f64>],
    model1: SmnModel,
    model2: SmnModel,
    options: &InvarianceOptions,
) -> Result<InvarianceReport> {
    if datasets.is_empty() {
        return Err(Error::Configuration("at least one dataset is required".into()));
    }
    let a = a_list(spec)?;
    let models = [model1, model2];
    let constants = models
        .iter()
        .map(|m| smn_constant(&a, m.mixing, &m.delta_prior))
        .collect::<Result<Vec<_>>>()?;
    let specs = models
        .iter()
        .map(|m| {
            spec.with_family(ReFamily::Smn {
                mixing: m.mixing,
                prior: m.delta_prior,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let normal = spec.with_family(ReFamily::Normal)?;

    let per_dataset = options.parallelism.map_range(datasets.len(), |d| -> Result<Vec<RatioEntry>> {
        let y = &datasets[d];
        let mn = profile_marginal_truncated(&normal, y, options.truncation, &options.oracle)?;
        specs
            .iter()
            .zip(&models)
            .zip(&constants)
            .map(|((s, m), &c)| {
                let ms = marginal_truncated_with(s, y, options.truncation, &options.oracle)?;
                let ratio = (ms.ln_value - mn.ln_value).exp();
                Ok(RatioEntry {
                    dataset: d,
                    model: m.label(),
                    ln_m_smn: ms.ln_value,
                    ln_m_normal: mn.ln_value,
                    ratio,
                    constant: c,
                    deviation: ratio / c - 1.0,
                    converged: ms.rel_increment < options.convergence_tol
                        && mn.rel_increment < options.convergence_tol,
                })
            })
            .collect()
    });
    let mut ratios = Vec::new();
    for r in per_dataset {
        ratios.extend(r?);
    }

    let predicted = constants[0] / constants[1];
    let bayes_factors: Vec<BfEntry> = ratios
        .chunks(2)
        .map(|pair| {
            let bf = (pair[0].ln_m_smn - pair[1].ln_m_smn).exp();
            BfEntry {
                dataset: pair[0].dataset,
                bayes_factor: bf,
                predicted,
                deviation: bf / predicted - 1.0,
            }
        })
        .collect();
    let max_ratio_deviation = ratios.iter().map(|r| r.deviation.abs()).fold(0.0, f64::max);
    let (bf_lo, bf_hi) = bayes_factors
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), b| (lo.min(b.bayes_factor), hi.max(b.bayes_factor)));
    let complete = ratios.iter().all(|r| r.converged);
    let mut notes = Vec::new();
    if !complete {
        notes.push(format!(
            "some oracle runs changed by more than {} at truncation level {}",
            options.convergence_tol, options.truncation.0
        ));
    }
    if constants.iter().any(|c| !c.is_finite()) {
        notes.push("a mixing moment diverges; the constant is infinite".into());
    }
    Ok(InvarianceReport {
        ratios,
        bayes_factors,
        max_ratio_deviation,
        max_bf_deviation: bf_hi / bf_lo - 1.0,
        complete,
        notes,
    })
}
