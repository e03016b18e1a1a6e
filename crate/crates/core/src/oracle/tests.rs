use super::*;
use crate::distributions::SkewParameterisation;
use crate::model::{design, Hyper, PriorStructure, ShapePrior};
use crate::numeric::quad::{integrate, Tolerance};
use crate::numeric::special::LN_SQRT_2PI;

fn y6() -> DVector<f64> {
    DVector::from_vec(vec![1.2, 0.3, 2.1, -0.4, 0.9, 1.7])
}

fn one_way(family: ReFamily, prior: PriorStructure) -> ModelSpec {
    ModelSpec::new(design::intercept(6), design::one_way(3, 2), vec![3], family, prior).unwrap()
}

fn h(v: i64) -> Hyper {
    Hyper::integer(v)
}

fn tpn_point(at: f64) -> ReFamily {
    ReFamily::Tpn {
        param: SkewParameterisation::epsilon_skew(),
        prior: ShapePrior::PointMass { at },
    }
}

fn coarse(levels: usize) -> ProbeSchedule {
    ProbeSchedule {
        steps: levels,
        ..ProbeSchedule::default()
    }
}

#[test]
fn profile_marginal_drops_to_fixed_effects_as_sigma1_vanishes() {
    let spec = one_way(ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let y = y6();
    let s0: f64 = 0.7;
    let sse = spec.sse(&y).unwrap();
    let ln_xtx = (6.0f64).ln();
    let exact = -5.0 * LN_SQRT_2PI - 5.0 * s0.ln() - 0.5 * ln_xtx - sse / (2.0 * s0 * s0);
    let at0 = ln_normal_profile_marginal(&spec, &y, &[s0, 0.0]).unwrap();
    let near0 = ln_normal_profile_marginal(&spec, &y, &[s0, 1e-7]).unwrap();
    assert!((at0 - exact).abs() < 1e-12, "{at0} {exact}");
    assert!((near0 - exact).abs() < 1e-9);
}

#[test]
fn profile_marginal_is_invariant_to_fixed_effect_shifts() {
    let spec = ModelSpec::new(
        nalgebra::DMatrix::from_row_slice(6, 2, &[1.0, 0.1, 1.0, -0.4, 1.0, 0.9, 1.0, 1.3, 1.0, -0.8, 1.0, 0.2]),
        design::one_way(3, 2),
        vec![3],
        ReFamily::Normal,
        PriorStructure::standard_diffuse(1),
    )
    .unwrap();
    let y = y6();
    let shifted = &y + spec.x() * DVector::from_vec(vec![3.5, -2.25]);
    for sig in [[0.5, 1.5], [2.0, 0.1], [1.0, 1.0]] {
        let a = ln_normal_profile_marginal(&spec, &y, &sig).unwrap();
        let b = ln_normal_profile_marginal(&spec, &shifted, &sig).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }
}

// Independent oracle: integrate f(y|β,u,σ₀) N(u|0,σ₁²) over (β, u) directly.
#[test]
fn profile_marginal_matches_direct_two_dimensional_quadrature() {
    let z = nalgebra::DMatrix::from_column_slice(3, 1, &[0.8, -1.1, 0.4]);
    let spec = ModelSpec::new(
        design::intercept(3),
        z.clone(),
        vec![1],
        ReFamily::Normal,
        PriorStructure::standard_diffuse(1),
    )
    .unwrap();
    let y = DVector::from_vec(vec![0.37, -1.42, 0.95]);
    let (s0, s1) = (0.9, 1.3);
    let tol = Tolerance::new(1e-300, 1e-11);
    let lik = |beta: f64, u: f64| -> f64 {
        let ss: f64 = (0..3).map(|j| (y[j] - beta - z[(j, 0)] * u).powi(2)).sum();
        (-3.0 * LN_SQRT_2PI - 3.0 * f64::ln(s0) - ss / (2.0 * s0 * s0)).exp()
    };
    let inner = |u: f64| {
        let prior = (-LN_SQRT_2PI - f64::ln(s1) - u * u / (2.0 * s1 * s1)).exp();
        prior * integrate(|b| lik(b, u), -12.0, 12.0, &[0.0], tol).unwrap().value
    };
    let direct = integrate(inner, -12.0, 12.0, &[0.0], tol).unwrap().value;
    let v = normal_profile_marginal(&spec, &y, &[s0, s1]).unwrap();
    assert!((v / direct - 1.0).abs() < 1e-6, "{v} {direct}");
}

#[test]
fn truncated_marginal_matches_profile_quadrature_with_proper_priors() {
    let prior = PriorStructure::power_exp(vec![h(1), h(1)], vec![h(1), h(1)]).unwrap();
    let spec = one_way(ReFamily::Normal, prior.clone());
    let y = y6();
    let est = marginal_truncated(&spec, &y, Truncation(8)).unwrap();
    let tol = Tolerance::new(1e-300, 1e-9);
    let f = |x0: f64, x1: f64| {
        let (s0, s1) = (x0.exp(), x1.exp());
        (ln_normal_profile_marginal(&spec, &y, &[s0, s1]).unwrap()
            + prior.ln_kernel(0, s0)
            + prior.ln_kernel(1, s1)
            + x0
            + x1)
            .exp()
    };
    let direct = integrate(
        |x1| integrate(|x0| f(x0, x1), -8.0, 8.0, &[], tol).unwrap().value,
        -8.0,
        8.0,
        &[],
        tol,
    )
    .unwrap()
    .value;
    assert!((est.value / direct - 1.0).abs() < 0.01, "{} {direct}", est.value);
    assert!((est.value / direct - 1.0).abs() < 1e-4, "tighter: {} {direct}", est.value);
}

#[test]
fn widening_never_decreases_the_estimate() {
    let spec = one_way(ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let y = y6() * 3.0;
    let mut prev = 0.0;
    for k in 1..=5 {
        let e = marginal_truncated(&spec, &y, Truncation(k)).unwrap();
        assert!(e.value >= prev && e.rel_increment >= 0.0, "{k}: {} < {prev}", e.value);
        prev = e.value;
    }
}

#[test]
fn symmetric_point_mass_tpn_equals_normal() {
    let prior = PriorStructure::standard_diffuse(1);
    let n = marginal_truncated(&one_way(ReFamily::Normal, prior.clone()), &y6(), Truncation(5)).unwrap();
    let t = marginal_truncated(&one_way(tpn_point(0.0), prior), &y6(), Truncation(5)).unwrap();
    assert!((t.value / n.value - 1.0).abs() < 1e-8, "{} {}", t.value, n.value);
}

#[test]
fn halving_the_step_leaves_converged_values_stable() {
    let prior = PriorStructure::standard_diffuse(1);
    for fam in [ReFamily::Normal, tpn_point(-0.4)] {
        let spec = one_way(fam, prior.clone());
        let base = OracleOptions::default();
        let fine = OracleOptions {
            grid: base.grid.refined(),
            ..base
        };
        let a = marginal_truncated_with(&spec, &y6(), Truncation(8), &base).unwrap();
        let b = marginal_truncated_with(&spec, &y6(), Truncation(8), &fine).unwrap();
        assert!((a.value / b.value - 1.0).abs() < 1e-3, "{} {}", a.value, b.value);
    }
}

#[test]
fn normal_probe_separates_proper_and_improper() {
    let spec = one_way(ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let v = propriety_probe(&spec, &y6(), &ProbeSchedule::default()).unwrap();
    assert_eq!(v.outcome, ProbeOutcome::Converges, "{}", v.to_csv());
    let flat = PriorStructure::power_exp(vec![h(0), h(0)], vec![h(0), h(0)]).unwrap();
    let v = propriety_probe(&spec.with_prior(flat).unwrap(), &y6(), &ProbeSchedule::default()).unwrap();
    assert_eq!(v.outcome, ProbeOutcome::Diverges, "{}", v.to_csv());
}

#[test]
fn probe_trace_is_nested_and_exports() {
    let spec = one_way(ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let v = propriety_probe(&spec, &y6(), &coarse(5)).unwrap();
    assert_eq!(v.increment_trace.len(), 5);
    for w in v.increment_trace.windows(2) {
        assert!(w[1].value >= w[0].value);
    }
    let single = marginal_truncated(&spec, &y6(), Truncation(3)).unwrap();
    assert!((single.value / v.increment_trace[2].value - 1.0).abs() < 1e-12);
    let csv = v.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,value,rel_increment");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].ends_with(','));
    assert_eq!(lines[2].split(',').count(), 3);
}

#[test]
fn sandwich_holds_and_collapses_at_symmetry() {
    let prior = PriorStructure::standard_diffuse(1);
    let spec = one_way(tpn_point(-0.5), prior.clone());
    for k in [2, 5] {
        let m = marginal_truncated(&spec, &y6(), Truncation(k)).unwrap();
        let b = bounding_integrals(&spec, &y6(), Truncation(k)).unwrap();
        assert!(b.lower <= m.value * (1.0 + 1e-9), "{} {}", b.lower, m.value);
        assert!(m.value <= b.upper_max * (1.0 + 1e-9));
        assert!(b.upper_max <= b.upper);
    }
    let sym = one_way(tpn_point(0.0), prior);
    let m = marginal_truncated(&sym, &y6(), Truncation(4)).unwrap();
    let b = bounding_integrals(&sym, &y6(), Truncation(4)).unwrap();
    assert!((b.lower / m.value - 1.0).abs() < 1e-9);
    assert!((b.upper_max / m.value - 1.0).abs() < 1e-9);
    assert!(b.upper > m.value);
}

#[test]
fn bounding_requires_two_piece_effects() {
    let spec = one_way(ReFamily::Normal, PriorStructure::standard_diffuse(1));
    assert!(matches!(
        bounding_integrals(&spec, &y6(), Truncation(2)),
        Err(Error::Configuration(_))
    ));
}

#[test]
fn refuses_beyond_desk_scale() {
    let spec = ModelSpec::new(
        design::intercept(8),
        design::one_way(4, 2),
        vec![4],
        ReFamily::Normal,
        PriorStructure::standard_diffuse(1),
    )
    .unwrap();
    let y = DVector::from_fn(8, |i, _| (i as f64).sin());
    assert!(matches!(
        marginal_truncated(&spec, &y, Truncation(1)),
        Err(Error::ScaleLimit(_))
    ));
}

#[test]
fn sequential_and_parallel_grids_agree_bitwise() {
    let spec = one_way(tpn_point(0.3), PriorStructure::standard_diffuse(1));
    let seq = OracleOptions {
        parallelism: Parallelism::Sequential,
        ..Default::default()
    };
    let a = marginal_truncated_with(&spec, &y6(), Truncation(3), &seq).unwrap();
    let b = marginal_truncated_with(&spec, &y6(), Truncation(3), &OracleOptions::default()).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
}

fn synthetic(values: &[f64]) -> Vec<TraceEntry> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| TraceEntry {
            k: i + 1,
            value: v,
            ln_value: v.ln(),
            rel_increment: if i == 0 { None } else { Some(v / values[i - 1] - 1.0) },
        })
        .collect()
}

#[test]
fn classification_rules() {
    let s = ProbeSchedule::default();
    let conv = synthetic(&[1.0, 1.5, 1.7, 1.75, 1.751, 1.7511]);
    assert_eq!(classify(&conv, &s), ProbeOutcome::Converges);
    let linear = synthetic(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(classify(&linear, &s), ProbeOutcome::Diverges);
    let expo = synthetic(&[1.0, 2.0, 4.0, 8.0, 16.0]);
    assert_eq!(classify(&expo, &s), ProbeOutcome::Diverges);
    // still growing but decelerating: neither pattern
    let slowing = synthetic(&[1.0, 2.0, 2.5, 2.75, 2.85, 2.9]);
    assert_eq!(classify(&slowing, &s), ProbeOutcome::Inconclusive);
}

#[test]
fn profile_path_agrees_with_core_path() {
    let spec = one_way(ReFamily::Normal, PriorStructure::standard_diffuse(1));
    let y = y6();
    for k in [2, 6] {
        let core = marginal_truncated(&spec, &y, Truncation(k)).unwrap();
        let prof = profile_marginal_truncated(&spec, &y, Truncation(k), &OracleOptions::default()).unwrap();
        assert!((prof.ln_value - core.ln_value).abs() < 1e-10, "{k}: {} {}", prof.ln_value, core.ln_value);
        assert!((prof.rel_increment - core.rel_increment).abs() < 1e-9);
    }
}
