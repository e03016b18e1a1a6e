use std::collections::BTreeMap;

use nalgebra::DVector;

use super::integrals::{condition_d, condition_e};
use super::verdict::{ConditionReport, ConditionStatus, ProprietyVerdict, TheoremCase};
use crate::error::{Error, Result};
use crate::model::{Hyper, ModelSpec, PriorStructure, ProbitSpec, ReFamily};
use crate::selection::smn_constant_detail;

type Conditions = BTreeMap<String, ConditionReport>;

fn power_exp(spec: &ModelSpec) -> Result<(&[Hyper], &[Hyper])> {
    match spec.prior() {
        PriorStructure::PowerExp { a, b } => Ok((a, b)),
        PriorStructure::HalfCauchy { .. } => Err(Error::Configuration(
            "this check needs the power-exponential prior structure; use the half-Cauchy check".into(),
        )),
    }
}

fn sample_guard(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<Option<bool>> {
    let Some(y) = y else { return Ok(None) };
    spec.check_data(y)?;
    let sse = spec.sse(y)?;
    // SSE of data in col(X) is rounding noise of order (ε‖y‖)²
    let noise = spec.n() as f64 * f64::EPSILON * y.norm_squared();
    Ok(Some(spec.prior().b0() > Hyper::ZERO || sse > noise))
}

fn int(v: usize) -> Hyper {
    Hyper::integer(v as i64)
}

/// Conditions (a), (b1), (b2), (c1), (c2), shared by every power-exp check.
fn scale_conditions(spec: &ModelSpec, a: &[Hyper], b: &[Hyper]) -> Conditions {
    let (n, p, q, t) = (spec.n(), spec.p(), spec.q(), spec.t());
    let qs = spec.factor_sizes();
    let mut c = Conditions::new();

    let mut ra = ConditionReport::new(
        ConditionStatus::Holds,
        "for each i ≥ 1: a_i < b_i = 0 or b_i > 0",
    );
    let mut ok = true;
    for i in 1..a.len() {
        let hold = (b[i].is_zero() && a[i] < Hyper::ZERO) || b[i] > Hyper::ZERO;
        ok &= hold;
        ra = ra.with(format!("a_{i}"), a[i].to_f64()).with(format!("b_{i}"), b[i].to_f64());
    }
    ra.status = ConditionStatus::from_bool(ok);
    c.insert("a".into(), ra);

    let mut rb1 = ConditionReport::new(ConditionStatus::Holds, "q_i + 2a_i > 0 for each i");
    let mut rb2 = ConditionReport::new(ConditionStatus::Holds, "q_i + 2a_i > q - t for each i");
    let (mut ok1, mut ok2) = (true, true);
    for (i, &qi) in qs.iter().enumerate() {
        let m = int(qi) + a[i + 1] * 2;
        ok1 &= m > Hyper::ZERO;
        ok2 &= m > int(q - t);
        rb1 = rb1.with(format!("q_{}+2a_{}", i + 1, i + 1), m.to_f64());
        rb2 = rb2.with(format!("q_{}+2a_{}", i + 1, i + 1), m.to_f64());
    }
    rb1.status = ConditionStatus::from_bool(ok1);
    rb2.status = ConditionStatus::from_bool(ok2);
    rb2 = rb2.with("q", q as f64).with("t", t as f64).with("q-t", (q - t) as f64);
    c.insert("b1".into(), rb1);
    c.insert("b2".into(), rb2);

    let np = int(n) - int(p);
    let c1 = np + a.iter().copied().sum::<Hyper>() * 2;
    c.insert(
        "c1".into(),
        ConditionReport::new(ConditionStatus::from_bool(c1 > Hyper::ZERO), "n - p + 2 Σ_{i=0..r} a_i > 0")
            .with("value", c1.to_f64())
            .with("n", n as f64)
            .with("p", p as f64),
    );
    let neg: Hyper = a[1..].iter().map(|&ai| ai.min(Hyper::ZERO)).sum();
    let c2 = np + a[0] * 2 + neg * 2;
    c.insert(
        "c2".into(),
        ConditionReport::new(
            ConditionStatus::from_bool(c2 > Hyper::ZERO),
            "n - p + 2a_0 + 2 Σ_{i≥1} min(0, a_i) > 0",
        )
        .with("value", c2.to_f64()),
    );
    c
}

fn case_sets(spec: &ModelSpec) -> (TheoremCase, Vec<&'static str>, Vec<&'static str>) {
    if spec.t() == spec.q() || spec.r() == 1 {
        (TheoremCase::Case1, vec!["a", "b2", "c1"], vec!["a", "b2", "c2"])
    } else {
        (TheoremCase::Case2, vec!["a", "b1", "c1"], vec!["a", "b2", "c2"])
    }
}

/// Two-piece normal random effects under the power-exponential prior.
pub fn check_theorem1(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<ProprietyVerdict> {
    let ReFamily::Tpn { param, prior } = spec.re_family() else {
        return Err(Error::Configuration(format!(
            "two-piece normal check applied to {} random effects",
            spec.re_family().name()
        )));
    };
    let (a, b) = power_exp(spec)?;
    let mut c = scale_conditions(spec, a, b);

    let mut rd = ConditionReport::new(ConditionStatus::Holds, "Π_i ∫ h^{q_i+2a_i} / H^{q_i} π(γ) dγ < ∞");
    let mut re = ConditionReport::new(ConditionStatus::Holds, "Π_i ∫ H^{2a_i} π(γ) dγ < ∞");
    let (mut prod_d, mut prod_e) = (1.0, 1.0);
    for (i, &qi) in spec.factor_sizes().iter().enumerate() {
        let d = condition_d(qi, a[i + 1], param, prior)?;
        let e = condition_e(a[i + 1], param, prior, false)?;
        prod_d *= d.value;
        prod_e *= e.value;
        rd = rd.with(format!("integral_{}", i + 1), d.value).with(format!("truncations_{}", i + 1), d.truncations as f64);
        re = re.with(format!("integral_{}", i + 1), e.value).with(format!("truncations_{}", i + 1), e.truncations as f64);
    }
    rd.status = ConditionStatus::from_bool(prod_d.is_finite());
    re.status = ConditionStatus::from_bool(prod_e.is_finite());
    c.insert("d".into(), rd.with("product", prod_d));
    c.insert("e".into(), re.with("product", prod_e));

    let (case, mut nec, mut suf) = case_sets(spec);
    nec.push("d");
    suf.push("e");
    let guard = sample_guard(spec, y)?;
    Ok(ProprietyVerdict::assemble(case, c, &nec, &suf, guard, vec![]))
}

/// Normal random effects: the scale conditions alone.
fn check_normal(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<ProprietyVerdict> {
    let (a, b) = power_exp(spec)?;
    let mut c = scale_conditions(spec, a, b);
    for l in ["d", "e"] {
        c.insert(
            l.into(),
            ConditionReport::new(ConditionStatus::NotApplicable, "no shape parameter under normal random effects"),
        );
    }
    let (case, nec, suf) = case_sets(spec);
    let guard = sample_guard(spec, y)?;
    Ok(ProprietyVerdict::assemble(case, c, &nec, &suf, guard, vec![]))
}

/// FSN random effects with a bounded transforming density `p`.
pub fn check_theorem2(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<ProprietyVerdict> {
    let ReFamily::Fsn { family, .. } = spec.re_family() else {
        return Err(Error::Configuration(format!(
            "FSN check applied to {} random effects",
            spec.re_family().name()
        )));
    };
    let Some(bound) = family.sup_bound() else {
        return Err(Error::TheoremInapplicable(format!(
            "the {} transforming density is not bounded",
            family.name()
        )));
    };
    let (a, b) = power_exp(spec)?;
    let all = scale_conditions(spec, a, b);
    let mut c = Conditions::new();
    for l in ["a", "b2", "c2"] {
        c.insert(l.into(), all[l].clone());
    }
    let notes = vec![format!("sup p = {bound}; sufficient conditions only")];
    let guard = sample_guard(spec, y)?;
    Ok(ProprietyVerdict::assemble(TheoremCase::Theorem2, c, &[], &["a", "b2", "c2"], guard, notes))
}

/// Half-Cauchy scale priors; covers any random-effects family whose
/// parameters carry proper priors.
pub fn check_corollary1(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<ProprietyVerdict> {
    let PriorStructure::HalfCauchy { a0, .. } = spec.prior() else {
        return Err(Error::Configuration(
            "half-Cauchy check needs the half-Cauchy prior structure".into(),
        ));
    };
    let (n, rk) = (spec.n(), spec.rank_xz());
    let mut c = Conditions::new();
    c.insert(
        "hc_a".into(),
        ConditionReport::new(ConditionStatus::from_bool(*a0 >= Hyper::ZERO), "a_0 ≥ 0").with("a_0", a0.to_f64()),
    );
    c.insert(
        "hc_b".into(),
        ConditionReport::new(ConditionStatus::from_bool(rk < n), "rank(X:Z) < n")
            .with("rank_xz", rk as f64)
            .with("n", n as f64),
    );
    let mut notes = vec!["sufficient conditions only".to_string()];
    if !matches!(spec.re_family(), ReFamily::Tpn { .. }) {
        notes.push(format!(
            "{} random effects with proper parameter priors: same two conditions apply",
            spec.re_family().name()
        ));
    }
    let guard = sample_guard(spec, y)?;
    Ok(ProprietyVerdict::assemble(TheoremCase::Corollary1, c, &[], &["hc_a", "hc_b"], guard, notes))
}

/// Scale-mixture random effects: the normal conditions together with
/// finiteness of the mixing constant.
fn check_smn(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<ProprietyVerdict> {
    let ReFamily::Smn { mixing, prior } = spec.re_family() else {
        unreachable!()
    };
    let (a, b) = power_exp(spec)?;
    if b[1..].iter().any(|v| !v.is_zero()) {
        return Err(Error::TheoremInapplicable(
            "scale-mixture factorisation needs b_i = 0 for i ≥ 1".into(),
        ));
    }
    let mut c = scale_conditions(spec, a, b);
    let k = smn_constant_detail(&a[1..], *mixing, prior)?;
    c.insert(
        "smn_moment".into(),
        ConditionReport::new(
            ConditionStatus::from_bool(k.is_finite()),
            "∫ Π_i E[τ^{-a_i} | δ] π(δ) dδ < ∞",
        )
        .with("constant", k.value),
    );
    let (case, mut nec, mut suf) = case_sets(spec);
    nec.push("smn_moment");
    suf.push("smn_moment");
    let guard = sample_guard(spec, y)?;
    let notes = vec!["marginal likelihood equals the normal one times the mixing constant".into()];
    Ok(ProprietyVerdict::assemble(case, c, &nec, &suf, guard, notes))
}

/// Routes a model to the applicable result.
pub fn check(spec: &ModelSpec, y: Option<&DVector<f64>>) -> Result<ProprietyVerdict> {
    match (spec.prior(), spec.re_family()) {
        (PriorStructure::HalfCauchy { .. }, _) => check_corollary1(spec, y),
        (_, ReFamily::Normal) => check_normal(spec, y),
        (_, ReFamily::Tpn { .. }) => check_theorem1(spec, y),
        (_, ReFamily::Fsn { .. }) => check_theorem2(spec, y),
        (_, ReFamily::Smn { .. }) => check_smn(spec, y),
    }
}

/// One-way probit model with TPN or bounded-FSN random effects.
pub fn check_probit(spec: &ProbitSpec) -> Result<ProprietyVerdict> {
    let r1 = spec.mixed_groups();
    let a1 = spec.a1();
    let mut c = Conditions::new();
    let mut notes = Vec::new();
    c.insert(
        "probit_i".into(),
        ConditionReport::new(
            ConditionStatus::from_bool(r1 >= 2),
            "at least two groups with both a success and a failure",
        )
        .with("r1", r1 as f64)
        .with("r", spec.r() as f64),
    );
    if r1 < 2 {
        notes.push(format!("only {r1} group(s) with mixed outcomes; at least 2 are required"));
    }
    if r1 < spec.r() {
        notes.push(format!("r1 = {r1} counts every mixed group (the largest admissible choice)"));
    }
    // -(r1 - 1)/2 < a1 < 0  ⇔  2a1 + r1 - 1 > 0 and a1 < 0
    let lower = a1 * 2 + int(r1) - Hyper::integer(1);
    c.insert(
        "probit_ii".into(),
        ConditionReport::new(
            ConditionStatus::from_bool(lower > Hyper::ZERO && a1 < Hyper::ZERO),
            "-(r1 - 1)/2 < a_1 < 0",
        )
        .with("a_1", a1.to_f64())
        .with("lower", -(r1 as f64 - 1.0) / 2.0),
    );
    match spec.re_family() {
        ReFamily::Tpn { param, prior } => {
            let e = condition_e(a1, param, prior, false)?;
            c.insert(
                "probit_iii".into(),
                ConditionReport::new(ConditionStatus::from_bool(e.is_finite()), "∫ H^{2a_1} π(γ) dγ < ∞")
                    .with("integral", e.value),
            );
        }
        ReFamily::Fsn { family, .. } => {
            if family.sup_bound().is_none() {
                return Err(Error::TheoremInapplicable(format!(
                    "the {} transforming density is not bounded",
                    family.name()
                )));
            }
            c.insert(
                "probit_iii".into(),
                ConditionReport::new(ConditionStatus::NotApplicable, "bounded p: no integral condition"),
            );
        }
        _ => unreachable!("ProbitSpec admits TPN or FSN only"),
    }
    let suf: Vec<&str> = ["probit_i", "probit_ii", "probit_iii"]
        .into_iter()
        .filter(|l| c[*l].status != ConditionStatus::NotApplicable)
        .collect();
    Ok(ProprietyVerdict::assemble(TheoremCase::ProbitRemark, c, &[], &suf, None, notes))
}
