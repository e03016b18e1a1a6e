//! One function per subcommand. Each writes its artifacts, prints a JSON
//! summary on stdout and reports how the run ended.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use flexlmm::distributions::{fsn_ln_pdf, fsn_sample, smn_pdf, tpn_cdf, tpn_ln_pdf, tpn_sample, ParameterisationRegistry};
use flexlmm::model::{design, ModelSpec, ProbitSpec, ReFamily};
use flexlmm::oracle::{propriety_probe, OracleOptions, ProbeOutcome, ProbeSchedule, Truncation};
use flexlmm::propriety::{check, check_probit, Overall};
use flexlmm::sampler::{diagnostics, run_chains, ChainOutput};
use flexlmm::selection::{savage_dickey, smn_bf_invariance_demo, InvarianceOptions};
use flexlmm::Parallelism;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use crate::config::{self, BfConfig, Command, DistConfig, RunConfig};
use crate::io;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// PROPER, CONVERGES or plain success.
    Ok,
    /// IMPROPER or DIVERGES.
    Negative,
    /// UNDETERMINED or INCONCLUSIVE.
    Unknown,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Negative => 2,
            Status::Unknown => 3,
        }
    }
}

struct Ctx {
    base: PathBuf,
    out: Option<PathBuf>,
    seed: u64,
    verbose: bool,
}

impl Ctx {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("flexlmm: {msg}");
        }
    }

    fn out_dir(&self) -> Result<Option<&Path>, String> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        }
        Ok(self.out.as_deref())
    }

    fn emit<T: Serialize>(&self, file: &str, value: &T) -> Result<(), String> {
        let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        if let Some(dir) = self.out_dir()? {
            io::write(&dir.join(file), &(text.clone() + "\n"))?;
        }
        // a closed stdout (e.g. piped into `head`) is not an error
        let _ = writeln!(std::io::stdout().lock(), "{text}");
        Ok(())
    }
}

fn fail(e: flexlmm::Error) -> String {
    e.to_string()
}

pub fn run(config_path: &Path, seed: Option<u64>, out: Option<&Path>, verbose: bool) -> Result<Status, String> {
    let cfg = config::load(config_path)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(|o| if o.is_absolute() { o.clone() } else { base.join(o) }));
    let ctx = Ctx {
        base,
        out,
        seed: seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        verbose,
    };
    ctx.log(&format!("{:?} with seed {}", cfg.command, ctx.seed));
    match cfg.command {
        Command::Check => run_check(&cfg, &ctx),
        Command::Probe => run_probe(&cfg, &ctx),
        Command::Sample => run_sample(&cfg, &ctx),
        Command::Bf => run_bf(&cfg, &ctx),
        Command::Dist => run_dist(&cfg, &ctx),
    }
}

fn family(cfg: &RunConfig) -> Result<ReFamily, String> {
    cfg.family.as_ref().map_or(Ok(ReFamily::Normal), |f| f.build().map_err(fail))
}

fn load_model(cfg: &RunConfig, ctx: &Ctx) -> Result<(ModelSpec, DVector<f64>), String> {
    let src = cfg.model.as_ref().ok_or("config: this command needs a `model` block")?;
    let z = io::read_matrix(&ctx.resolve(&src.z))?;
    let y = io::read_vector(&ctx.resolve(&src.y))?;
    let x = match &src.x {
        Some(p) => io::read_matrix(&ctx.resolve(p))?,
        None => design::intercept(z.nrows()),
    };
    if y.len() != x.nrows() {
        return Err(format!("y has {} entries but the design has {} rows", y.len(), x.nrows()));
    }
    let prior = cfg
        .prior
        .clone()
        .unwrap_or_else(|| config::default_prior(src.factor_sizes.len()));
    let spec = ModelSpec::new(x, z, src.factor_sizes.clone(), family(cfg)?, prior).map_err(fail)?;
    ctx.log(&format!("model n={} p={} q={} r={}", spec.n(), spec.x().ncols(), spec.z().ncols(), spec.r()));
    Ok((spec, y))
}

fn run_check(cfg: &RunConfig, ctx: &Ctx) -> Result<Status, String> {
    let verdict = match &cfg.probit {
        Some(p) => {
            let spec = ProbitSpec::new(p.group_counts.clone(), p.a1, family(cfg)?).map_err(fail)?;
            check_probit(&spec).map_err(fail)?
        }
        None => {
            let (spec, y) = load_model(cfg, ctx)?;
            check(&spec, Some(&y)).map_err(fail)?
        }
    };
    ctx.emit("verdict.json", &verdict)?;
    Ok(match verdict.overall {
        Overall::Proper => Status::Ok,
        Overall::Improper => Status::Negative,
        Overall::Undetermined => Status::Unknown,
    })
}

fn parallelism(parallel: bool) -> Parallelism {
    if parallel {
        Parallelism::Parallel
    } else {
        Parallelism::Sequential
    }
}

fn run_probe(cfg: &RunConfig, ctx: &Ctx) -> Result<Status, String> {
    let (spec, y) = load_model(cfg, ctx)?;
    let p = cfg.probe.clone().unwrap_or_default();
    let schedule = ProbeSchedule {
        steps: p.steps,
        tol: p.tol,
        growth: p.growth,
        slack: p.slack,
        options: OracleOptions {
            grid: p.grid,
            parallelism: parallelism(p.parallel),
        },
    };
    let verdict = propriety_probe(&spec, &y, &schedule).map_err(fail)?;
    if let Some(dir) = ctx.out_dir()? {
        io::write(&dir.join("trace.csv"), &verdict.to_csv())?;
    }
    ctx.emit("probe.json", &verdict)?;
    Ok(match verdict.outcome {
        ProbeOutcome::Converges => Status::Ok,
        ProbeOutcome::Diverges => Status::Negative,
        ProbeOutcome::Inconclusive => Status::Unknown,
    })
}

fn chains(cfg: &RunConfig, ctx: &Ctx, spec: &ModelSpec, y: &DVector<f64>) -> Result<Vec<ChainOutput>, String> {
    let s = cfg.sample.clone().unwrap_or_default();
    ctx.log(&format!("{} chains of {} iterations", s.chains, s.iterations));
    run_chains(
        spec,
        y,
        s.iterations,
        s.burn_in,
        ctx.seed,
        s.chains,
        &s.tuning,
        parallelism(s.parallel),
    )
    .map_err(fail)
}

fn run_sample(cfg: &RunConfig, ctx: &Ctx) -> Result<Status, String> {
    let dir = ctx
        .out_dir()?
        .ok_or("sample writes one CSV per chain; give --out or an `output` field")?
        .to_path_buf();
    let (spec, y) = load_model(cfg, ctx)?;
    let out = chains(cfg, ctx, &spec, &y)?;
    for c in &out {
        io::write(&dir.join(format!("chain_{}.csv", c.chain)), &c.to_csv())?;
    }
    let report = diagnostics(&out).map_err(fail)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let means: serde_json::Map<String, serde_json::Value> = out[0]
        .names
        .iter()
        .map(|n| {
            let m = out.iter().filter_map(|c| c.mean(n)).sum::<f64>() / out.len() as f64;
            (n.clone(), json!(m))
        })
        .collect();
    let acceptance: Vec<_> = out.iter().map(|c| &c.acceptance_rates).collect();
    ctx.emit(
        "diagnostics.json",
        &json!({
            "seed": ctx.seed,
            "posterior_means": means,
            "acceptance_rates": acceptance,
            "diagnostics": report,
        }),
    )?;
    Ok(Status::Ok)
}

fn run_bf(cfg: &RunConfig, ctx: &Ctx) -> Result<Status, String> {
    let bf = cfg.bf.as_ref().ok_or("config: `bf` needs a `bf` block")?;
    match bf {
        BfConfig::SavageDickey { parameter, gamma0 } => {
            let (spec, y) = load_model(cfg, ctx)?;
            let prior = *spec
                .re_family()
                .shape_prior()
                .ok_or("Savage–Dickey needs a family with a shape parameter")?;
            let (default_param, default_gamma0) = match spec.re_family() {
                ReFamily::Tpn { param, .. } => ("gamma_1", param.symmetric_point()),
                ReFamily::Fsn { .. } => ("lambda_1", Some(0.0)),
                _ => ("delta", None),
            };
            let name = parameter.clone().unwrap_or_else(|| default_param.to_string());
            let g0 = gamma0
                .or(default_gamma0)
                .ok_or("no default nested value for this family; set `gamma0`")?;
            let out = chains(cfg, ctx, &spec, &y)?;
            let pooled: Vec<Vec<f64>> = out.iter().flat_map(|c| c.draws.iter().cloned()).collect();
            let pooled = ChainOutput::from_draws(out[0].names.clone(), pooled, ctx.seed, 0).map_err(fail)?;
            let sd = savage_dickey(&pooled, &name, &prior, g0).map_err(fail)?;
            for w in &sd.warnings {
                eprintln!("warning: {w}");
            }
            ctx.emit(
                "bf.json",
                &json!({"method": "savage_dickey", "parameter": name, "gamma0": g0, "seed": ctx.seed, "result": sd}),
            )?;
            Ok(Status::Ok)
        }
        BfConfig::SmnInvariance {
            datasets,
            models,
            truncation,
        } => {
            let (spec, _) = load_model(cfg, ctx)?;
            let ys = datasets
                .iter()
                .map(|p| io::read_vector(&ctx.resolve(p)))
                .collect::<Result<Vec<_>, _>>()?;
            let opts = InvarianceOptions {
                truncation: Truncation(*truncation),
                ..InvarianceOptions::default()
            };
            let report = smn_bf_invariance_demo(&spec, &ys, models.0, models.1, &opts).map_err(fail)?;
            let complete = report.complete;
            ctx.emit("bf.json", &json!({"method": "smn_invariance", "result": report}))?;
            Ok(if complete { Status::Ok } else { Status::Unknown })
        }
    }
}

fn run_dist(cfg: &RunConfig, ctx: &Ctx) -> Result<Status, String> {
    use rand::Rng;
    let d = cfg.dist.as_ref().ok_or("config: `dist` needs a `dist` block")?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let value = match d {
        DistConfig::Tpn {
            parameterisation,
            gamma,
            mu,
            sigma,
            at,
            samples,
        } => {
            let param = ParameterisationRegistry::default().get(parameterisation).map_err(fail)?;
            let ln_pdf = at
                .iter()
                .map(|&u| tpn_ln_pdf(u, *mu, *sigma, *gamma, &param))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            let cdf = at
                .iter()
                .map(|&u| tpn_cdf(u, *mu, *sigma, *gamma, &param))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            let draws = (0..*samples)
                .map(|_| tpn_sample(&mut rng, *mu, *sigma, *gamma, &param))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            json!({"kind": "tpn", "at": at, "pdf": exp_all(&ln_pdf), "ln_pdf": ln_pdf, "cdf": cdf, "samples": draws})
        }
        DistConfig::Fsn {
            family,
            lambda,
            mu,
            sigma,
            at,
            samples,
        } => {
            let ln_pdf = at
                .iter()
                .map(|&u| fsn_ln_pdf(u, *mu, *sigma, *lambda, *family))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            let draws = (0..*samples)
                .map(|_| fsn_sample(&mut rng, *mu, *sigma, *lambda, *family))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            json!({"kind": "fsn", "at": at, "pdf": exp_all(&ln_pdf), "ln_pdf": ln_pdf, "samples": draws})
        }
        DistConfig::Smn {
            mixing,
            delta,
            sigma,
            at,
            samples,
        } => {
            let pdf = at
                .iter()
                .map(|&u| smn_pdf(&[u], *sigma, *mixing, *delta))
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            let draws = (0..*samples)
                .map(|_| {
                    let tau = mixing.sample(&mut rng, *delta)?;
                    let z: f64 = rng.sample(StandardNormal);
                    Ok(sigma * z / tau.sqrt())
                })
                .collect::<Result<Vec<_>, flexlmm::Error>>()
                .map_err(fail)?;
            let ln_pdf: Vec<f64> = pdf.iter().map(|p| p.ln()).collect();
            json!({"kind": "smn", "at": at, "pdf": pdf, "ln_pdf": ln_pdf, "samples": draws})
        }
    };
    ctx.emit("dist.json", &value)?;
    Ok(Status::Ok)
}

fn exp_all(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.exp()).collect()
}
