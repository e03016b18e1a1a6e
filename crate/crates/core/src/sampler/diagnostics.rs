//! Effective sample size, split-chain potential scale reduction, batch-means
//! standard errors and a two-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

use super::ChainOutput;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostic {
    pub name: String,
    /// `None` when the draws are constant.
    pub ess: Option<f64>,
    pub rhat: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub parameters: Vec<ParameterDiagnostic>,
    pub warnings: Vec<String>,
}

impl DiagnosticsReport {
    pub fn get(&self, name: &str) -> Option<&ParameterDiagnostic> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
/// Chains must share a length of at least 4.
pub fn effective_sample_size(chains: &[&[f64]]) -> Option<f64> {
    let m = chains.len();
    let n = chains.first()?.len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if !(var_plus > 0.0) || !(w > 0.0) {
        return None;
    }
    let rho = |t: usize| {
        let ac: f64 = chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, t)).sum::<f64>() / m as f64;
        1.0 - (w - ac) / var_plus
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        t += 2;
    }
    let total = (m * n) as f64;
    Some(total / tau.max(1.0 / total.log10().max(1.0)))
}

/// Split-chain `R̂`; `None` if the within-chain variance vanishes.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let n = chains.first()?.len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return None;
    }
    let half = n / 2;
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        pieces.push(&c[..half]);
        pieces.push(&c[n - half..]);
    }
    let means: Vec<f64> = pieces.iter().map(|c| mean(c)).collect();
    let w = pieces.iter().map(|c| variance(c)).sum::<f64>() / pieces.len() as f64;
    if !(w > 0.0) {
        return None;
    }
    let nh = half as f64;
    let b = nh * variance(&means);
    let var_plus = (nh - 1.0) / nh * w + b / nh;
    Some((var_plus / w).sqrt())
}

/// Standard error of the mean by non-overlapping batch means
/// (`⌊√n⌋` batches).
pub fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    let k = (n as f64).sqrt().floor().max(2.0) as usize;
    let size = n / k;
    if size == 0 {
        return f64::INFINITY;
    }
    let batches: Vec<f64> = (0..k).map(|j| mean(&x[j * size..(j + 1) * size])).collect();
    (variance(&batches) / k as f64).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Per-parameter ESS and split `R̂` across chains of equal length.
pub fn diagnostics(chains: &[ChainOutput]) -> Result<DiagnosticsReport> {
    let first = chains
        .first()
        .ok_or_else(|| Error::Configuration("diagnostics need at least one chain".into()))?;
    let len = first.draws.len();
    if chains.iter().any(|c| c.draws.len() != len || c.names != first.names) {
        return Err(Error::Dimension("chains differ in length or parameters".into()));
    }
    let mut warnings = Vec::new();
    if chains.len() == 1 {
        warnings.push("single chain: R̂ compares the two halves of one chain only".into());
    } else {
        let mut streams: Vec<(u64, u64)> = chains.iter().map(|c| (c.seed, c.chain)).collect();
        streams.sort_unstable();
        streams.dedup();
        if streams.len() < chains.len() {
            warnings.push("some chains share seed and stream; they are copies".into());
        }
    }
    let parameters = first
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.draws.iter().map(|d| d[j]).collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let ess = effective_sample_size(&refs);
            let rhat = split_rhat(&refs);
            let flag = match rhat {
                None => Some("constant draws: R̂ undefined".to_string()),
                Some(r) if r > 1.05 => Some(format!("R̂ = {r:.3} > 1.05")),
                _ => None,
            };
            ParameterDiagnostic {
                name: name.clone(),
                ess,
                rhat,
                flag,
            }
        })
        .collect();
    Ok(DiagnosticsReport {
        chains: chains.len(),
        draws_per_chain: len,
        parameters,
        warnings,
    })
}
