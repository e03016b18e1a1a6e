//! The marginal-likelihood integrand with `β` and `u` integrated in closed
//! form, leaving a function of the scales and shape parameters.
//!
//! With `B` an orthonormal basis of the residual space of `X`, `r = Bᵀy` and
//! `W = BᵀZ`, integrating `β` leaves
//! `(2π)^{-(n-p)/2} σ₀^{-(n-p)} |XᵀX|^{-1/2} exp(-‖r - Wu‖²/2σ₀²)`.
//! Against a Gaussian kernel `u ~ N(0, diag(d²))` the remaining integral over a
//! sign orthant is `|B_d|^{-1/2} e^{-Q/2} P(orthant)` where
//! `B_d = diag(d) WᵀW diag(d)/σ₀² + I`; the `(2π)^{q/2}` factors cancel.

use nalgebra::{DMatrix, DVector};

use crate::distributions::FsnFamily;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ReFamily};
use crate::numeric::linalg::{ln_det_spd, residual_basis};
use crate::numeric::mvn::{mvn_cdf, CdfMode};
use crate::numeric::quad::gauss_legendre_on;
use crate::numeric::special::LN_SQRT_2PI;

/// Orthant probabilities below this are recomputed with the accurate CDF
/// when their orthant carries weight.
const SMALL_PROBABILITY: f64 = 1e-6;

pub(crate) struct Prepared {
    w: DMatrix<f64>,
    wtw: DMatrix<f64>,
    wtr: DVector<f64>,
    r: DVector<f64>,
    dof: f64,
    ln_const: f64,
    /// Index into `(σ₀, σ₁, ..)` of the scale owning each column.
    col_factor: Vec<usize>,
    pub(crate) sse: f64,
}

/// Gaussian part for one choice of per-column prior scales.
pub(crate) struct Core {
    pub ln_value: f64,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl Prepared {
    pub fn new(spec: &ModelSpec, y: &DVector<f64>) -> Result<Self> {
        spec.check_data(y)?;
        let x = spec.x();
        let basis = residual_basis(x);
        let w = basis.transpose() * spec.z();
        let r = basis.transpose() * y;
        let sse = r.norm_squared();
        let xtx = x.transpose() * x;
        let dof = (spec.n() - spec.p()) as f64;
        let ln_const = -dof * LN_SQRT_2PI - 0.5 * ln_det_spd(&xtx)?;
        Ok(Prepared {
            wtw: w.transpose() * &w,
            wtr: w.transpose() * &r,
            w,
            r,
            dof,
            ln_const,
            col_factor: spec.column_factor().into_iter().map(|i| i + 1).collect(),
            sse,
        })
    }

    pub fn q(&self) -> usize {
        self.col_factor.len()
    }

    /// Log of the `β`-integrated likelihood constant at `σ₀`, without `u`.
    pub fn ln_front(&self, sigma0: f64) -> f64 {
        self.ln_const - self.dof * sigma0.ln()
    }

    /// Per-column scale `σ_{i(k)}` times `mult[i(k)]`.
    pub fn column_scales(&self, sigmas: &[f64], mut mult: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
        self.col_factor
            .iter()
            .enumerate()
            .map(|(k, &i)| sigmas[i] * mult(k, i))
            .collect()
    }

    pub fn core(&self, sigma0: f64, d: &[f64], moments: bool) -> Option<Core> {
        let q = d.len();
        let s2 = sigma0 * sigma0;
        let mut b = DMatrix::<f64>::identity(q, q);
        for i in 0..q {
            for j in 0..q {
                b[(i, j)] += d[i] * self.wtw[(i, j)] * d[j] / s2;
            }
        }
        let chol = b.cholesky()?;
        let ln_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let sg = DVector::from_iterator(q, (0..q).map(|k| d[k] * self.wtr[k] / s2));
        let v = chol.solve(&sg);
        let mean: Vec<f64> = (0..q).map(|k| d[k] * v[k]).collect();
        let m = DVector::from_column_slice(&mean);
        let resid = &self.r - &self.w * &m;
        let mut quad = resid.norm_squared() / s2;
        for k in 0..q {
            let z = mean[k] / d[k];
            quad += z * z;
        }
        let cov = if moments {
            let mut inv = chol.inverse();
            for i in 0..q {
                for j in 0..q {
                    inv[(i, j)] *= d[i] * d[j];
                }
            }
            inv
        } else {
            DMatrix::zeros(0, 0)
        };
        Some(Core {
            ln_value: -0.5 * ln_det - 0.5 * quad,
            mean,
            cov,
        })
    }
}

/// Shape-parameter configuration at one quadrature node.
#[derive(Debug, Clone)]
pub(crate) struct ShapeNode {
    pub ln_weight: f64,
    /// `(aᵢ, bᵢ)` per factor for two-piece normal effects.
    pub ab: Vec<(f64, f64)>,
    /// `λᵢ` per factor for skew-normal effects.
    pub lambda: Vec<f64>,
    /// Scale multipliers `τᵢ^{-1/2}` for scale mixtures.
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kind {
    Normal,
    Tpn,
    SkewNormal,
}

/// How the random-effects kernel is replaced in the bounding integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BoundKernel {
    Min,
    Sum,
    Max,
}

fn unit_nodes(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre_on(n, 0.0, 1.0)
}

fn tensor<T: Clone>(per_factor: &[Vec<(f64, T)>]) -> Vec<(f64, Vec<T>)> {
    let mut out = vec![(0.0, Vec::new())];
    for list in per_factor {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for (lw, vals) in &out {
            for (w, v) in list {
                let mut vv = vals.clone();
                vv.push(v.clone());
                next.push((lw + w, vv));
            }
        }
        out = next;
    }
    out
}

/// Log-weights and `τ` values for integrating over the mixing distribution.
fn tau_nodes(mixing: crate::distributions::MixingDistribution, delta: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let lo = mixing
        .quantile(1e-12, delta)
        .ok_or_else(|| Error::numerical("mixing quantile unavailable"))?;
    let hi = mixing
        .quantile(1.0 - 1e-12, delta)
        .ok_or_else(|| Error::numerical("mixing quantile unavailable"))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::numerical(format!("mixing range [{lo}, {hi}] unusable")));
    }
    let nodes = gauss_legendre_on(n, lo.ln(), hi.ln());
    let mut out: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&(s, w)| {
            let tau = s.exp();
            let ld = mixing.ln_density(tau, delta).unwrap_or(f64::NEG_INFINITY);
            (w.ln() + ld + s, tau)
        })
        .collect();
    let m = out.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = out.iter().map(|v| (v.0 - m).exp()).sum();
    let ln_total = m + total.ln();
    for v in &mut out {
        v.0 -= ln_total;
    }
    Ok(out)
}

/// Quadrature over the shape parameters of `family` with `r` factors.
pub(crate) fn shape_nodes(
    family: &ReFamily,
    r: usize,
    shape_n: usize,
    tau_n: usize,
) -> Result<(Kind, Vec<ShapeNode>)> {
    let prior_nodes = |prior: &crate::model::ShapePrior| -> Result<Vec<(f64, f64)>> {
        if let Some(at) = prior.point_mass() {
            return Ok(vec![(0.0, at)]);
        }
        unit_nodes(shape_n)
            .into_iter()
            .map(|(w, wt)| Ok((wt.ln(), prior.quantile(w)?)))
            .collect()
    };
    let plain = |ln_weight: f64| ShapeNode {
        ln_weight,
        ab: vec![(1.0, 1.0); r],
        lambda: vec![0.0; r],
        scale: vec![1.0; r],
    };
    match family {
        ReFamily::Normal => Ok((Kind::Normal, vec![plain(0.0)])),
        ReFamily::Tpn { param, prior } => {
            let one = prior_nodes(prior)?;
            let mut per = Vec::with_capacity(one.len());
            for (lw, g) in one {
                per.push((lw, param.scales(g)?));
            }
            if let [(_, (a, b))] = per[..] {
                if a == b {
                    // a single symmetric point: the orthants recombine into one Gaussian
                    return Ok((Kind::Normal, vec![ShapeNode { scale: vec![a; r], ab: vec![(a, b); r], ..plain(0.0) }]));
                }
            }
            let nodes = tensor(&vec![per; r])
                .into_iter()
                .map(|(lw, ab)| ShapeNode { ab, ..plain(lw) })
                .collect();
            Ok((Kind::Tpn, nodes))
        }
        ReFamily::Fsn { family: fam, prior } => match fam {
            FsnFamily::Uniform => Ok((Kind::Normal, vec![plain(0.0)])),
            FsnFamily::SkewNormal => {
                let per = prior_nodes(prior)?;
                let nodes = tensor(&vec![per; r])
                    .into_iter()
                    .map(|(lw, lambda)| ShapeNode { lambda, ..plain(lw) })
                    .collect();
                Ok((Kind::SkewNormal, nodes))
            }
            FsnFamily::BetaGenerated => Err(Error::Configuration(
                "the oracle has no closed-form u integral for the beta-generated family".into(),
            )),
        },
        ReFamily::Smn { mixing, prior } => {
            if *mixing == crate::distributions::MixingDistribution::PointMass {
                return Ok((Kind::Normal, vec![plain(0.0)]));
            }
            let mut nodes = Vec::new();
            for (lw, delta) in prior_nodes(prior)? {
                let taus: Vec<(f64, f64)> = tau_nodes(*mixing, delta, tau_n)?
                    .into_iter()
                    .map(|(w, tau)| (w, 1.0 / tau.sqrt()))
                    .collect();
                for (tw, scale) in tensor(&vec![taus; r]) {
                    nodes.push(ShapeNode { scale, ..plain(lw + tw) });
                }
            }
            Ok((Kind::Normal, nodes))
        }
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn standardise(mean: &[f64], cov: &DMatrix<f64>, sign: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let q = mean.len();
    let sd: Vec<f64> = (0..q).map(|k| cov[(k, k)].sqrt()).collect();
    let z = (0..q).map(|k| sign(k) * mean[k] / sd[k]).collect();
    let mut corr = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            corr[i * q + j] = if i == j {
                1.0
            } else {
                sign(i) * sign(j) * cov[(i, j)] / (sd[i] * sd[j])
            };
        }
    }
    (z, corr)
}

/// Either a cheap upper bound on the `u`-integrated value (orthant
/// probabilities replaced by one) or the value itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Eval {
    Bound,
    Exact,
}

impl Prepared {
    /// `ln ∫ f(y|β,u,σ₀) f(u|σ, shape) dβ du` at one shape node.
    pub fn ln_u_integral(&self, kind: Kind, sigmas: &[f64], node: &ShapeNode, eval: Eval) -> f64 {
        let q = self.q();
        let s0 = sigmas[0];
        let front = self.ln_front(s0);
        match kind {
            Kind::Normal => {
                let d = self.column_scales(sigmas, |_, i| node.scale[i - 1]);
                self.core(s0, &d, false)
                    .map_or(f64::NEG_INFINITY, |c| front + c.ln_value)
            }
            Kind::SkewNormal => {
                let d = self.column_scales(sigmas, |_, _| 1.0);
                let Some(core) = self.core(s0, &d, eval == Eval::Exact) else {
                    return f64::NEG_INFINITY;
                };
                let base = front + q as f64 * std::f64::consts::LN_2 + core.ln_value;
                if eval == Eval::Bound {
                    return base;
                }
                let alpha: Vec<f64> = (0..q)
                    .map(|k| {
                        let i = self.col_factor[k];
                        node.lambda[i - 1] / sigmas[i]
                    })
                    .collect();
                let mut c = core.cov.clone();
                for i in 0..q {
                    for j in 0..q {
                        c[(i, j)] *= alpha[i] * alpha[j];
                    }
                    c[(i, i)] += 1.0;
                }
                let am: Vec<f64> = (0..q).map(|k| alpha[k] * core.mean[k]).collect();
                let (z, corr) = standardise(&am, &c, |_| 1.0);
                let mut p = mvn_cdf(&z, &corr, CdfMode::Fast);
                if p < SMALL_PROBABILITY {
                    p = mvn_cdf(&z, &corr, CdfMode::Accurate);
                }
                base + p.ln()
            }
            Kind::Tpn => {
                let mut terms = Vec::with_capacity(1 << q);
                let mut bounds = Vec::with_capacity(1 << q);
                let mut cores = Vec::with_capacity(1 << q);
                for orth in 0..(1usize << q) {
                    let mut ln_pref = 0.0;
                    let d = self.column_scales(sigmas, |k, i| {
                        let (a, b) = node.ab[i - 1];
                        let c = if orth >> k & 1 == 1 { a } else { b };
                        ln_pref += (2.0 * c / (a + b)).ln();
                        c
                    });
                    let Some(core) = self.core(s0, &d, eval == Eval::Exact) else {
                        return f64::NEG_INFINITY;
                    };
                    bounds.push(front + ln_pref + core.ln_value);
                    cores.push(core);
                }
                let ub = log_sum_exp(&bounds);
                if eval == Eval::Bound {
                    return ub;
                }
                for (orth, core) in cores.iter().enumerate() {
                    let sign = |k: usize| if orth >> k & 1 == 1 { 1.0 } else { -1.0 };
                    let (z, corr) = standardise(&core.mean, &core.cov, sign);
                    let mut p = mvn_cdf(&z, &corr, CdfMode::Fast);
                    if p < SMALL_PROBABILITY && bounds[orth] - ub > -7.0 {
                        p = mvn_cdf(&z, &corr, CdfMode::Accurate);
                    }
                    terms.push(bounds[orth] + p.ln());
                }
                log_sum_exp(&terms)
            }
        }
    }

    /// The bounding integrand: every `c` in the exponent replaced by `κᵢ`,
    /// the prefactor `2/(σᵢHᵢ)` kept.
    pub fn ln_bound_integral(&self, sigmas: &[f64], node: &ShapeNode, kernel: BoundKernel) -> f64 {
        let s0 = sigmas[0];
        let mut ln_pref = 0.0;
        let d = self.column_scales(sigmas, |_, i| {
            let (a, b) = node.ab[i - 1];
            let kappa = match kernel {
                BoundKernel::Min => a.min(b),
                BoundKernel::Sum => a + b,
                BoundKernel::Max => a.max(b),
            };
            ln_pref += (2.0 * kappa / (a + b)).ln();
            kappa
        });
        self.core(s0, &d, false)
            .map_or(f64::NEG_INFINITY, |c| self.ln_front(s0) + ln_pref + c.ln_value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SkewParameterisation;
    use crate::model::{design, PriorStructure, ShapePrior};

    fn one_way_spec(family: ReFamily) -> ModelSpec {
        ModelSpec::new(
            design::intercept(6),
            design::one_way(3, 2),
            vec![3],
            family,
            PriorStructure::standard_diffuse(1),
        )
        .unwrap()
    }

    fn data() -> DVector<f64> {
        DVector::from_vec(vec![1.2, 0.3, 2.1, -0.4, 0.9, 1.7])
    }

    // Direct Gaussian integral via the marginal covariance V = σ₀²I + Z D Zᵀ.
    fn normal_reference(spec: &ModelSpec, y: &DVector<f64>, s0: f64, s1: f64) -> f64 {
        let z = spec.z();
        let v = DMatrix::identity(6, 6) * (s0 * s0) + z * z.transpose() * (s1 * s1);
        let vi = v.clone().try_inverse().unwrap();
        let x = spec.x();
        let xvx = x.transpose() * &vi * x;
        let proj = &vi - &vi * x * xvx.clone().try_inverse().unwrap() * x.transpose() * &vi;
        let quad = (y.transpose() * proj * y)[(0, 0)];
        (-(5.0) * LN_SQRT_2PI - 0.5 * v.determinant().ln() - 0.5 * xvx.determinant().ln() - 0.5 * quad).exp()
    }

    #[test]
    fn normal_core_matches_marginal_covariance_form() {
        let spec = one_way_spec(ReFamily::Normal);
        let prep = Prepared::new(&spec, &data()).unwrap();
        let (kind, nodes) = shape_nodes(spec.re_family(), 1, 8, 8).unwrap();
        for &(s0, s1) in &[(0.7, 1.3), (0.2, 4.0), (2.5, 0.05)] {
            let v = prep.ln_u_integral(kind, &[s0, s1], &nodes[0], Eval::Exact).exp();
            let r = normal_reference(&spec, &data(), s0, s1);
            assert!((v / r - 1.0).abs() < 1e-12, "{v} {r}");
        }
    }

    #[test]
    fn tpn_orthants_sum_to_normal_at_symmetry() {
        let fam = ReFamily::Tpn {
            param: SkewParameterisation::epsilon_skew(),
            prior: ShapePrior::PointMass { at: 0.0 },
        };
        let spec = one_way_spec(fam);
        let prep = Prepared::new(&spec, &data()).unwrap();
        let (kind, nodes) = shape_nodes(spec.re_family(), 1, 8, 8).unwrap();
        assert_eq!(kind, Kind::Normal);
        let node = ShapeNode {
            ab: vec![(1.0, 1.0)],
            ..nodes[0].clone()
        };
        let v = prep.ln_u_integral(Kind::Tpn, &[0.8, 1.1], &node, Eval::Exact).exp();
        let r = normal_reference(&spec, &data(), 0.8, 1.1);
        assert!((v / r - 1.0).abs() < 1e-9, "{v} {r}");
    }

    // One-dimensional check: with q = 1 the TPN integral is a sum of two
    // truncated Gaussian integrals evaluable by plain quadrature over u.
    #[test]
    fn tpn_single_effect_matches_direct_quadrature() {
        use crate::numeric::quad::{integrate, Tolerance};
        let x = design::intercept(3);
        let z = DMatrix::from_column_slice(3, 1, &[1.0, -0.5, 0.2]);
        let fam = ReFamily::Tpn {
            param: SkewParameterisation::epsilon_skew(),
            prior: ShapePrior::PointMass { at: 0.4 },
        };
        let spec = ModelSpec::new(x, z.clone(), vec![1], fam, PriorStructure::standard_diffuse(1)).unwrap();
        let y = DVector::from_vec(vec![0.3, -1.0, 0.8]);
        let prep = Prepared::new(&spec, &y).unwrap();
        let (kind, nodes) = shape_nodes(spec.re_family(), 1, 8, 8).unwrap();
        let (s0, s1) = (0.6, 0.9);
        let v = prep.ln_u_integral(kind, &[s0, s1], &nodes[0], Eval::Exact).exp();
        let (a, b) = (0.6, 1.4);
        // β integrated: residual after removing the mean
        let f = |u: f64| {
            let e: Vec<f64> = (0..3).map(|j| y[j] - z[(j, 0)] * u).collect();
            let mean = e.iter().sum::<f64>() / 3.0;
            let ss: f64 = e.iter().map(|v| (v - mean) * (v - mean)).sum();
            let lik = (2.0 * std::f64::consts::PI).powf(-1.0) * s0.powi(-2) * 3f64.powf(-0.5) * (-ss / (2.0 * s0 * s0)).exp();
            let c = if u < 0.0 { b } else { a };
            lik * 2.0 / (s1 * (a + b)) * crate::numeric::special::norm_pdf(u / (s1 * c))
        };
        let d = integrate(f, -30.0, 30.0, &[0.0], Tolerance::new(1e-16, 1e-12)).unwrap().value;
        assert!((v / d - 1.0).abs() < 1e-9, "{v} {d}");
    }

    #[test]
    fn skew_normal_at_zero_lambda_is_normal() {
        let fam = ReFamily::Fsn {
            family: FsnFamily::SkewNormal,
            prior: ShapePrior::PointMass { at: 0.0 },
        };
        let spec = one_way_spec(fam);
        let prep = Prepared::new(&spec, &data()).unwrap();
        let (kind, nodes) = shape_nodes(spec.re_family(), 1, 8, 8).unwrap();
        let v = prep.ln_u_integral(kind, &[0.8, 1.1], &nodes[0], Eval::Exact).exp();
        let r = normal_reference(&spec, &data(), 0.8, 1.1);
        assert!((v / r - 1.0).abs() < 1e-9, "{v} {r}");
    }

    #[test]
    fn bounds_bracket_the_orthant_sum() {
        let fam = ReFamily::Tpn {
            param: SkewParameterisation::epsilon_skew(),
            prior: ShapePrior::PointMass { at: -0.55 },
        };
        let spec = one_way_spec(fam);
        let prep = Prepared::new(&spec, &data()).unwrap();
        let (kind, nodes) = shape_nodes(spec.re_family(), 1, 8, 8).unwrap();
        for &(s0, s1) in &[(0.8, 1.1), (0.1, 3.0), (3.0, 0.3)] {
            let m = prep.ln_u_integral(kind, &[s0, s1], &nodes[0], Eval::Exact);
            let lo = prep.ln_bound_integral(&[s0, s1], &nodes[0], BoundKernel::Min);
            let hi = prep.ln_bound_integral(&[s0, s1], &nodes[0], BoundKernel::Max);
            let hs = prep.ln_bound_integral(&[s0, s1], &nodes[0], BoundKernel::Sum);
            assert!(lo <= m && m <= hi && hi <= hs, "{lo} {m} {hi} {hs}");
        }
    }

    #[test]
    fn tau_weights_integrate_moments() {
        use crate::distributions::MixingDistribution;
        let nodes = tau_nodes(MixingDistribution::StudentT, 2.0, 48).unwrap();
        let m: f64 = nodes.iter().map(|(lw, t)| lw.exp() * t.sqrt()).sum();
        assert!((m - 0.886_226_925_452_758).abs() < 1e-6, "{m}");
    }
}
