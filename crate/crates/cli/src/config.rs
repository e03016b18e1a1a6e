//! Run configuration: one strict JSON document, matrices in external CSV.

use std::path::{Path, PathBuf};

use flexlmm::distributions::{FsnFamily, MixingDistribution, ParameterisationRegistry};
use flexlmm::model::{Hyper, PriorStructure, ReFamily, ShapePrior};
use flexlmm::oracle::GridSpec;
use flexlmm::sampler::Tuning;
use flexlmm::selection::SmnModel;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Probe,
    Sample,
    Bf,
    Dist,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<ModelSource>,
    pub prior: Option<PriorStructure>,
    pub family: Option<FamilyConfig>,
    pub probit: Option<ProbitConfig>,
    pub probe: Option<ProbeConfig>,
    pub sample: Option<SampleConfig>,
    pub bf: Option<BfConfig>,
    pub dist: Option<DistConfig>,
    pub seed: Option<u64>,
    /// Output directory, relative to the config file.
    pub output: Option<PathBuf>,
}

/// CSV paths are resolved against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    /// Fixed-effects design; an intercept column when omitted.
    pub x: Option<PathBuf>,
    pub z: PathBuf,
    pub y: PathBuf,
    pub factor_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Normal,
    Tpn { parameterisation: String, prior: ShapePrior },
    Fsn { family: FsnFamily, prior: ShapePrior },
    Smn { mixing: MixingDistribution, prior: ShapePrior },
}

impl FamilyConfig {
    pub fn build(&self) -> flexlmm::Result<ReFamily> {
        Ok(match self {
            FamilyConfig::Normal => ReFamily::Normal,
            FamilyConfig::Tpn { parameterisation, prior } => ReFamily::Tpn {
                param: ParameterisationRegistry::default().get(parameterisation)?,
                prior: *prior,
            },
            FamilyConfig::Fsn { family, prior } => ReFamily::Fsn {
                family: *family,
                prior: *prior,
            },
            FamilyConfig::Smn { mixing, prior } => ReFamily::Smn {
                mixing: *mixing,
                prior: *prior,
            },
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbitConfig {
    /// `(successes, trials)` per group.
    pub group_counts: Vec<(u64, u64)>,
    pub a1: Hyper,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub steps: usize,
    pub tol: f64,
    pub growth: f64,
    pub slack: f64,
    pub grid: GridSpec,
    pub parallel: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            steps: 8,
            tol: 1e-3,
            growth: 1.01,
            slack: 0.02,
            grid: GridSpec::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub parallel: bool,
    pub tuning: Tuning,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            iterations: 6000,
            burn_in: 1000,
            chains: 4,
            parallel: true,
            tuning: Tuning::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum BfConfig {
    /// Samples the model (using the `sample` block) and evaluates the
    /// density ratio at `gamma0`.
    SavageDickey {
        parameter: Option<String>,
        gamma0: Option<f64>,
    },
    SmnInvariance {
        datasets: Vec<PathBuf>,
        models: (SmnModel, SmnModel),
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
}

fn default_truncation() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistConfig {
    Tpn {
        parameterisation: String,
        gamma: f64,
        #[serde(default)]
        mu: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        at: Vec<f64>,
        #[serde(default)]
        samples: usize,
    },
    Fsn {
        family: FsnFamily,
        lambda: f64,
        #[serde(default)]
        mu: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        at: Vec<f64>,
        #[serde(default)]
        samples: usize,
    },
    Smn {
        mixing: MixingDistribution,
        delta: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        at: Vec<f64>,
        #[serde(default)]
        samples: usize,
    },
}

fn one() -> f64 {
    1.0
}

/// `/`-separated pointer built from a serde path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        s.push('/');
        match seg {
            Segment::Seq { index } => s.push_str(&index.to_string()),
            Segment::Map { key } => s.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => s.push_str(variant),
            Segment::Unknown => s.push('?'),
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| format!("config {}: {}", pointer(e.path()), e.inner()))
}

pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&text)
}

pub fn default_prior(r: usize) -> PriorStructure {
    PriorStructure::standard_diffuse(r)
}
