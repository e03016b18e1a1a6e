use nalgebra::{DMatrix, DVector};

use super::*;
use crate::distributions::{FsnFamily, MixingDistribution, SkewParameterisation};
use crate::model::{design, Hyper, PriorStructure, ReFamily, ShapePrior};

fn y6() -> DVector<f64> {
    DVector::from_vec(vec![1.2, 0.3, 2.1, -0.4, 0.9, 1.7])
}

fn x2() -> DMatrix<f64> {
    DMatrix::from_row_slice(6, 2, &[1.0, 0.1, 1.0, -0.4, 1.0, 0.9, 1.0, 1.3, 1.0, -0.8, 1.0, 0.2])
}

fn spec_with(x: DMatrix<f64>, family: ReFamily, prior: PriorStructure) -> ModelSpec {
    ModelSpec::new(x, design::one_way(3, 2), vec![3], family, prior).unwrap()
}

fn ig11() -> PriorStructure {
    PriorStructure::power_exp(vec![Hyper::integer(1); 2], vec![Hyper::integer(1); 2]).unwrap()
}

fn eps_uniform() -> ReFamily {
    ReFamily::Tpn {
        param: SkewParameterisation::epsilon_skew(),
        prior: ShapePrior::uniform(-1.0, 1.0).unwrap(),
    }
}

fn fixed(s: &[f64]) -> Tuning {
    Tuning {
        fixed_scales: Some(s.to_vec()),
        ..Tuning::default()
    }
}

/// Posterior of `(β, u)` given the scales under a flat prior on β.
fn conjugate_posterior(spec: &ModelSpec, y: &DVector<f64>, s0: f64, s1: f64) -> (DVector<f64>, DMatrix<f64>) {
    let (x, z) = (spec.x(), spec.z());
    let (p, q) = (x.ncols(), z.ncols());
    let w = crate::numeric::linalg::horizontal_concat(x, z).unwrap();
    let mut prec = w.transpose() * &w / (s0 * s0);
    for k in 0..q {
        prec[(p + k, p + k)] += 1.0 / (s1 * s1);
    }
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * (w.transpose() * y) / (s0 * s0);
    (mean, cov)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[test]
fn conjugate_subcase_matches_closed_form() {
    let spec = spec_with(x2(), ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let y = y6();
    let (s0, s1) = (0.8, 1.2);
    let (m, cov) = conjugate_posterior(&spec, &y, s0, s1);
    let out = mwg_sample(&spec, &y, 21_000, 1_000, 5, &fixed(&[s0, s1])).unwrap();
    for (j, name) in ["beta_1", "beta_2", "u_1", "u_3"].iter().enumerate() {
        let idx = [0, 1, 2, 4][j];
        let c = out.column(name).unwrap();
        let se = batch_means_se(&c);
        assert!((mean(&c) - m[idx]).abs() < 3.0 * se, "{name}: {} vs {} (se {se})", mean(&c), m[idx]);
        let v = diagnostics::variance(&c);
        assert!((v / cov[(idx, idx)] - 1.0).abs() < 0.05, "{name}: var {v} vs {}", cov[(idx, idx)]);
    }
}

#[test]
fn stationary_from_exact_posterior_draws() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let spec = spec_with(x2(), ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let y = y6();
    let (s0, s1) = (0.8, 1.2);
    let (m, cov) = conjugate_posterior(&spec, &y, s0, s1);
    let l = cov.clone().cholesky().unwrap().l();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let reps = 2_000;
    let steps = 3;
    let mut end = Vec::with_capacity(reps);
    for rep in 0..reps {
        let e = DVector::from_fn(m.len(), |_, _| StandardNormal.sample(&mut rng));
        let start = &m + &l * e;
        let mut init: Vec<f64> = start.iter().copied().collect();
        init.extend([s0, s1]);
        let tuning = Tuning {
            init: Some(init),
            ..fixed(&[s0, s1])
        };
        let out = mwg_sample(&spec, &y, steps, steps - 1, rep as u64, &tuning).unwrap();
        end.push(out.draws[0].clone());
    }
    for idx in [0, 1, 2, 3] {
        let c: Vec<f64> = end.iter().map(|d| d[idx]).collect();
        let sd = cov[(idx, idx)].sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((mean(&c) - m[idx]).abs() < 4.0 * se, "param {idx} drifted");
        let v = diagnostics::variance(&c);
        assert!((v / cov[(idx, idx)] - 1.0).abs() < 0.15, "param {idx}: var {v}");
    }
}

#[test]
fn symmetric_point_mass_tpn_matches_normal_effects() {
    let y = y6();
    let normal = spec_with(design::intercept(6), ReFamily::Normal, ig11());
    let tpn = spec_with(
        design::intercept(6),
        ReFamily::Tpn {
            param: SkewParameterisation::epsilon_skew(),
            prior: ShapePrior::PointMass { at: 0.0 },
        },
        ig11(),
    );
    let a = mwg_sample(&normal, &y, 42_000, 2_000, 1, &Tuning::default()).unwrap();
    let b = mwg_sample(&tpn, &y, 42_000, 2_000, 2, &Tuning::default()).unwrap();
    for name in ["beta_1", "u_2", "sigma_0", "sigma_1"] {
        let (ca, cb) = (a.column(name).unwrap(), b.column(name).unwrap());
        let se = batch_means_se(&ca).hypot(batch_means_se(&cb));
        assert!((mean(&ca) - mean(&cb)).abs() < 4.0 * se, "{name}");
        let thin = |c: &[f64]| c.iter().step_by(20).copied().collect::<Vec<_>>();
        let (_, p) = ks_two_sample(&thin(&ca), &thin(&cb));
        assert!(p > 1e-3, "{name}: KS p = {p}");
    }
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let spec = spec_with(design::intercept(6), eps_uniform(), PriorStructure::standard_diffuse(1));
    let y = y6();
    let a = mwg_sample(&spec, &y, 600, 100, 42, &Tuning::default()).unwrap();
    let b = mwg_sample(&spec, &y, 600, 100, 42, &Tuning::default()).unwrap();
    assert_eq!(a, b);
    let c = mwg_sample(&spec, &y, 600, 100, 43, &Tuning::default()).unwrap();
    assert_ne!(a.draws, c.draws);
}

#[test]
fn chain_streams_do_not_depend_on_scheduling() {
    let spec = spec_with(design::intercept(6), eps_uniform(), PriorStructure::standard_diffuse(1));
    let y = y6();
    let t = Tuning::default();
    let seq = run_chains(&spec, &y, 400, 100, 9, 3, &t, Parallelism::Sequential).unwrap();
    let par = run_chains(&spec, &y, 400, 100, 9, 3, &t, Parallelism::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq[0], mwg_sample(&spec, &y, 400, 100, 9, &t).unwrap());
    assert_ne!(seq[0].draws, seq[1].draws);
}

#[test]
fn improper_posterior_is_refused_without_override() {
    let spec = spec_with(
        design::intercept(6),
        ReFamily::Normal,
        PriorStructure::power_exp(vec![Hyper::ZERO; 2], vec![Hyper::ZERO; 2]).unwrap(),
    );
    let y = y6();
    let err = mwg_sample(&spec, &y, 10, 0, 1, &Tuning::default()).unwrap_err();
    assert!(matches!(err, Error::ProprietyGate(_)), "{err}");
    let t = Tuning {
        allow_improper: true,
        ..Tuning::default()
    };
    assert!(mwg_sample(&spec, &y, 10, 0, 1, &t).is_ok());
}

#[test]
fn degenerate_state_aborts_with_dump() {
    let spec = spec_with(design::intercept(6), ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let y = y6();
    let mut init = vec![0.0; 1 + 3];
    init.extend([1e-300, 1.0]);
    let t = Tuning {
        init: Some(init),
        ..Tuning::default()
    };
    match mwg_sample(&spec, &y, 50, 0, 1, &t) {
        Err(Error::NonFinite { iteration, state }) => {
            assert_eq!(iteration, 0);
            assert!(state.contains("sigma=["), "{state}");
        }
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

fn support_ok(out: &ChainOutput, shape_ok: impl Fn(f64) -> bool) {
    for row in &out.draws {
        for (name, v) in out.names.iter().zip(row) {
            assert!(v.is_finite(), "{name}");
            if name.starts_with("sigma_") || name.starts_with("tau_") {
                assert!(*v > 0.0, "{name} = {v}");
            }
            if name.starts_with("gamma_") || name.starts_with("lambda_") || name == "delta" {
                assert!(shape_ok(*v), "{name} = {v}");
            }
        }
    }
}

#[test]
fn draws_stay_inside_parameter_domains() {
    let y = y6();
    let t = Tuning::default();
    let eps = spec_with(design::intercept(6), eps_uniform(), PriorStructure::standard_diffuse(1));
    support_ok(&mwg_sample(&eps, &y, 3_000, 500, 3, &t).unwrap(), |g| g > -1.0 && g < 1.0);

    let isf = spec_with(
        design::intercept(6),
        ReFamily::Tpn {
            param: SkewParameterisation::inverse_scale_factors(),
            prior: ShapePrior::Gamma { shape: 2.0, rate: 1.0 },
        },
        PriorStructure::standard_diffuse(1),
    );
    support_ok(&mwg_sample(&isf, &y, 3_000, 500, 3, &t).unwrap(), |g| g > 0.0);

    let beta = spec_with(
        design::intercept(6),
        ReFamily::Fsn {
            family: FsnFamily::BetaGenerated,
            prior: ShapePrior::Gamma { shape: 3.0, rate: 2.0 },
        },
        ig11(),
    );
    let t_beta = Tuning {
        allow_improper: true,
        ..Tuning::default()
    };
    support_ok(&mwg_sample(&beta, &y, 3_000, 500, 3, &t_beta).unwrap(), |l| l > 0.0);

    let smn = spec_with(
        design::intercept(6),
        ReFamily::Smn {
            mixing: MixingDistribution::StudentT,
            prior: ShapePrior::Gamma { shape: 2.0, rate: 0.5 },
        },
        ig11(),
    );
    let out = mwg_sample(&smn, &y, 3_000, 500, 3, &Tuning { allow_improper: true, ..Tuning::default() }).unwrap();
    assert!(out.names.iter().any(|n| n == "tau_1"));
    support_ok(&out, |d| d > 0.0);

    let hc = spec_with(
        design::intercept(6),
        eps_uniform(),
        PriorStructure::half_cauchy(Hyper::ZERO, vec![1.0]).unwrap(),
    );
    support_ok(&mwg_sample(&hc, &y, 3_000, 500, 3, &t).unwrap(), |g| g > -1.0 && g < 1.0);
}

#[test]
fn tuned_acceptance_rates_are_moderate() {
    let y = y6();
    let t = Tuning::default();
    let tpn = spec_with(design::intercept(6), eps_uniform(), PriorStructure::standard_diffuse(1));
    let fsn = spec_with(
        design::intercept(6),
        ReFamily::Fsn {
            family: FsnFamily::SkewNormal,
            prior: ShapePrior::uniform(-3.0, 3.0).unwrap(),
        },
        PriorStructure::standard_diffuse(1),
    );
    for spec in [tpn, fsn] {
        let out = mwg_sample(&spec, &y, 8_000, 3_000, 11, &t).unwrap();
        assert!(!out.acceptance_rates.is_empty());
        for (block, rate) in &out.acceptance_rates {
            assert!((0.1..=0.6).contains(rate), "{}: {block} accepts {rate}", spec.re_family().name());
        }
    }
}

#[test]
fn csv_and_json_exports() {
    let spec = spec_with(design::intercept(6), eps_uniform(), PriorStructure::standard_diffuse(1));
    let y = y6();
    let chains = run_chains(&spec, &y, 300, 100, 4, 2, &Tuning::default(), Parallelism::Sequential).unwrap();
    let csv = chains[0].to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "beta_1,u_1,u_2,u_3,sigma_0,sigma_1,gamma_1"
    );
    assert_eq!(lines.count(), 200);
    let report = diagnostics(&chains).unwrap();
    assert!(report.warnings.is_empty());
    let json = serde_json::to_string(&report).unwrap();
    let back: DiagnosticsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.get("beta_1").unwrap().name, "beta_1");
}

#[test]
fn single_chain_report_carries_a_warning() {
    let spec = spec_with(design::intercept(6), ReFamily::Normal, ig11());
    let out = mwg_sample(&spec, &y6(), 500, 100, 1, &Tuning::default()).unwrap();
    assert_eq!(out.diagnostics.chains, 1);
    assert!(!out.diagnostics.warnings.is_empty());
}

#[test]
fn independent_chains_agree() {
    let spec = spec_with(design::intercept(6), ReFamily::Normal, ig11());
    let chains = run_chains(&spec, &y6(), 6_000, 1_000, 8, 4, &Tuning::default(), Parallelism::Parallel).unwrap();
    let report = diagnostics(&chains).unwrap();
    for p in &report.parameters {
        let rhat = p.rhat.unwrap();
        assert!(rhat < 1.05, "{}: {rhat}", p.name);
        assert!(p.ess.unwrap() > 500.0, "{}", p.name);
    }
}
