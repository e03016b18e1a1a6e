use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::truncnorm::std_normal_above;
use super::{diagnostics, ChainOutput, DiagnosticsReport, Tuning};
use crate::distributions::{FsnFamily, MixingDistribution, SkewParameterisation};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, PriorStructure, ReFamily, ShapePrior};
use crate::numeric::special::{ln_norm_cdf, ln_norm_pdf};

enum Family<'a> {
    Normal,
    Tpn(&'a SkewParameterisation),
    Fsn(FsnFamily),
    Smn(MixingDistribution),
}

/// Robbins–Monro scale adaptation for one Metropolis block.
struct Adapt {
    ln_step: f64,
    accepted: usize,
    tried: usize,
}

impl Adapt {
    fn new(step: f64) -> Self {
        Self {
            ln_step: step.ln(),
            accepted: 0,
            tried: 0,
        }
    }

    fn step(&self) -> f64 {
        self.ln_step.exp()
    }

    fn record(&mut self, accepted: bool, it: usize, burn_in: usize, tuning: &Tuning) {
        if it < burn_in {
            if tuning.adapt {
                let gain = ((it + 1) as f64).powf(-0.6);
                self.ln_step = (self.ln_step + gain * (accepted as u8 as f64 - tuning.target_accept)).clamp(-20.0, 5.0);
            }
        } else {
            self.tried += 1;
            self.accepted += accepted as usize;
        }
    }

    fn rate(&self) -> f64 {
        if self.tried == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

/// Map from ℝ onto the open interval `(lo, hi)`.
#[derive(Clone, Copy)]
struct Transform {
    lo: f64,
    hi: f64,
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

impl Transform {
    fn to_real(self, x: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => ((x - self.lo) / (self.hi - x)).ln(),
            (true, false) => (x - self.lo).ln(),
            (false, true) => (self.hi - x).ln(),
            (false, false) => x,
        }
    }

    /// `(x, ln |dx/dt|)`.
    fn inverse(self, t: f64) -> (f64, f64) {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let w = self.hi - self.lo;
                (self.lo + w / (1.0 + (-t).exp()), w.ln() - softplus(-t) - softplus(t))
            }
            (true, false) => (self.lo + t.exp(), t),
            (false, true) => (self.hi - t.exp(), t),
            (false, false) => (t, 0.0),
        }
    }

    fn contains(self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

struct ShapeInfo {
    prior: ShapePrior,
    transform: Transform,
    fixed: Option<f64>,
}

struct Sampler<'a> {
    y: &'a DVector<f64>,
    x: &'a DMatrix<f64>,
    z: &'a DMatrix<f64>,
    family: Family<'a>,
    shape: Option<ShapeInfo>,
    ranges: Vec<std::ops::Range<usize>>,
    /// 0-based factor of each column of Z.
    factor: Vec<usize>,
    /// `(XᵀX)⁻¹Xᵀ`.
    hat: DMatrix<f64>,
    /// Upper Cholesky factor `Lᵀ` of `XᵀX`.
    xtx_lt: DMatrix<f64>,
    ztz: DMatrix<f64>,
    z_norm2: Vec<f64>,
    prior: &'a PriorStructure,
    tuning: &'a Tuning,
    burn_in: usize,
}

#[derive(Clone)]
struct State {
    beta: DVector<f64>,
    u: DVector<f64>,
    sigma: Vec<f64>,
    shape: Vec<f64>,
    tau: Vec<f64>,
    xi: Vec<f64>,
    resid: DVector<f64>,
}

impl State {
    fn dump(&self) -> String {
        let v = |x: &[f64]| x.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(", ");
        format!(
            "beta=[{}] u=[{}] sigma=[{}] shape=[{}] tau=[{}]",
            v(self.beta.as_slice()),
            v(self.u.as_slice()),
            v(&self.sigma),
            v(&self.shape),
            v(&self.tau)
        )
    }

    fn finite(&self) -> bool {
        self.beta.iter().chain(self.u.iter()).chain(&self.shape).chain(&self.tau).all(|v| v.is_finite())
            && self.sigma.iter().all(|&s| s > 0.0 && s.is_finite())
            && self.tau.iter().all(|&t| t > 0.0)
    }
}

fn inv_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> Option<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return None;
    }
    let g: f64 = Gamma::new(shape, 1.0).ok()?.sample(rng);
    let v = rate / g;
    (v > 0.0 && v.is_finite()).then_some(v)
}

fn normals<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Metropolis accept step on log targets.
fn accept<R: Rng>(rng: &mut R, ln_ratio: f64) -> bool {
    if ln_ratio.is_nan() {
        return false;
    }
    ln_ratio >= 0.0 || rng.random::<f64>().ln() < ln_ratio
}

pub(super) fn names(spec: &ModelSpec) -> Vec<String> {
    let mut names: Vec<String> = (1..=spec.p()).map(|j| format!("beta_{j}")).collect();
    names.extend((1..=spec.q()).map(|k| format!("u_{k}")));
    names.extend((0..=spec.r()).map(|i| format!("sigma_{i}")));
    match spec.re_family() {
        ReFamily::Normal => {}
        ReFamily::Tpn { .. } => names.extend((1..=spec.r()).map(|i| format!("gamma_{i}"))),
        ReFamily::Fsn { .. } => names.extend((1..=spec.r()).map(|i| format!("lambda_{i}"))),
        ReFamily::Smn { mixing, .. } => {
            if *mixing != MixingDistribution::PointMass {
                names.push("delta".into());
                names.extend((1..=spec.r()).map(|i| format!("tau_{i}")));
            }
        }
    }
    names
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a ModelSpec, y: &'a DVector<f64>, tuning: &'a Tuning, burn_in: usize) -> Result<Self> {
        spec.check_data(y)?;
        let x = spec.x();
        let z = spec.z();
        let xtx = x.transpose() * x;
        let chol = xtx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical("XᵀX is not positive definite"))?;
        let hat = chol.solve(&x.transpose());
        let xtx_lt = chol.l().transpose();
        let ztz = z.transpose() * z;
        let z_norm2 = (0..spec.q()).map(|k| ztz[(k, k)]).collect();
        let family = match spec.re_family() {
            ReFamily::Normal => Family::Normal,
            ReFamily::Tpn { param, .. } => Family::Tpn(param),
            ReFamily::Fsn { family, .. } => Family::Fsn(*family),
            ReFamily::Smn { mixing, .. } => Family::Smn(*mixing),
        };
        let shape = match (spec.re_family().shape_prior(), spec.re_family().shape_domain()) {
            (Some(prior), Some(domain)) => {
                let (lo, hi) = prior.support();
                Some(ShapeInfo {
                    prior: *prior,
                    transform: Transform {
                        lo: lo.max(domain.lo),
                        hi: hi.min(domain.hi),
                    },
                    fixed: prior.point_mass(),
                })
            }
            _ => None,
        };
        if let Some(s) = &tuning.fixed_scales {
            if s.len() != spec.r() + 1 || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Configuration(format!(
                    "fixed_scales needs {} positive values (σ₀..σ_r)",
                    spec.r() + 1
                )));
            }
        }
        if !(tuning.initial_step > 0.0 && tuning.target_accept > 0.0 && tuning.target_accept < 1.0) {
            return Err(Error::Configuration(
                "initial_step must be positive and target_accept inside (0, 1)".into(),
            ));
        }
        Ok(Self {
            y,
            x,
            z,
            family,
            shape,
            ranges: spec.factor_ranges(),
            factor: spec.column_factor(),
            hat,
            xtx_lt,
            ztz,
            z_norm2,
            prior: spec.prior(),
            tuning,
            burn_in,
        })
    }

    fn r(&self) -> usize {
        self.ranges.len()
    }

    fn n_shapes(&self) -> usize {
        match self.family {
            Family::Normal => 0,
            Family::Tpn(_) | Family::Fsn(_) => self.r(),
            Family::Smn(m) => (m != MixingDistribution::PointMass) as usize,
        }
    }

    fn n_tau(&self) -> usize {
        match self.family {
            Family::Smn(m) if m != MixingDistribution::PointMass => self.r(),
            _ => 0,
        }
    }

    fn initial_shape(&self) -> Result<f64> {
        let info = self.shape.as_ref().expect("shape families carry a prior");
        if let Some(at) = info.fixed {
            return Ok(at);
        }
        let natural = match self.family {
            Family::Tpn(param) => param.symmetric_point(),
            Family::Fsn(FsnFamily::BetaGenerated) => Some(1.0),
            Family::Fsn(_) => Some(0.0),
            _ => None,
        };
        match natural {
            Some(g) if info.transform.contains(g) => Ok(g),
            _ => info.prior.quantile(0.5),
        }
    }

    fn initial_state(&self, names: &[String]) -> Result<State> {
        let (n, p, q, r) = (self.y.len(), self.x.ncols(), self.z.ncols(), self.r());
        let beta = &self.hat * self.y;
        let resid = self.y - self.x * &beta;
        let sse = resid.norm_squared();
        let s_ref = if n > p && sse > 0.0 { (sse / (n - p) as f64).sqrt() } else { 1.0 };
        let mut st = State {
            beta,
            u: DVector::zeros(q),
            sigma: vec![s_ref; r + 1],
            shape: Vec::new(),
            tau: vec![1.0; self.n_tau()],
            xi: Vec::new(),
            resid,
        };
        if self.n_shapes() > 0 {
            st.shape = vec![self.initial_shape()?; self.n_shapes()];
        }
        if let Some(init) = &self.tuning.init {
            if init.len() != names.len() {
                return Err(Error::Configuration(format!(
                    "init has {} values but the chain has {} parameters",
                    init.len(),
                    names.len()
                )));
            }
            let mut it = init.iter().copied();
            st.beta.iter_mut().chain(st.u.iter_mut()).chain(st.sigma.iter_mut()).chain(st.shape.iter_mut()).chain(st.tau.iter_mut()).for_each(|v| *v = it.next().unwrap());
            if st.sigma.iter().chain(&st.tau).any(|v| !(*v > 0.0)) {
                return Err(Error::Domain("initial scales and precisions must be positive".into()));
            }
            if let Some(info) = &self.shape {
                let free = info.fixed.is_none();
                if st.shape.iter().any(|&g| if free { !info.transform.contains(g) } else { Some(g) != info.fixed }) {
                    return Err(Error::Domain("initial shape outside the prior support".into()));
                }
            }
        }
        if let Some(fixed) = &self.tuning.fixed_scales {
            st.sigma.clone_from(fixed);
        }
        if let PriorStructure::HalfCauchy { s, .. } = self.prior {
            st.xi = s.iter().map(|v| v * v).collect();
        }
        st.resid = self.y - self.x * &st.beta - self.z * &st.u;
        Ok(st)
    }

    fn draw_beta<R: Rng>(&self, rng: &mut R, st: &mut State) {
        let w = self.y - self.z * &st.u;
        let mean = &self.hat * &w;
        let e = normals(rng, self.x.ncols());
        let dev = self
            .xtx_lt
            .solve_upper_triangular(&e)
            .expect("Cholesky factor is nonsingular");
        st.beta = mean + dev * st.sigma[0];
        st.resid = w - self.x * &st.beta;
    }

    /// Joint Gaussian draw of `u` given per-column prior precisions.
    fn draw_u_gaussian<R: Rng>(&self, rng: &mut R, st: &mut State, prec: &[f64]) -> Option<()> {
        let v0 = st.sigma[0] * st.sigma[0];
        let mut a = &self.ztz / v0;
        for (k, pk) in prec.iter().enumerate() {
            a[(k, k)] += pk;
        }
        let chol = a.cholesky()?;
        let w = self.y - self.x * &st.beta;
        let rhs = self.z.transpose() * &w / v0;
        let mean = chol.solve(&rhs);
        let dev = chol.l().transpose().solve_upper_triangular(&normals(rng, prec.len()))?;
        st.u = mean + dev;
        st.resid = w - self.z * &st.u;
        Some(())
    }

    fn draw_u_tpn<R: Rng>(&self, rng: &mut R, st: &mut State, param: &SkewParameterisation) {
        let v0 = st.sigma[0] * st.sigma[0];
        for k in 0..self.z.ncols() {
            let f = self.factor[k];
            let (a, b) = param.scales_unchecked(st.shape[f]);
            let col = self.z.column(k);
            st.resid.axpy(st.u[k], &col, 1.0);
            let g = col.dot(&st.resid) / v0;
            let rho = self.z_norm2[k] / v0;
            let s = st.sigma[f + 1];
            let pp = rho + 1.0 / (s * a).powi(2);
            let pm = rho + 1.0 / (s * b).powi(2);
            let lw_p = 0.5 * g * g / pp - 0.5 * pp.ln() + ln_norm_cdf(g / pp.sqrt());
            let lw_m = 0.5 * g * g / pm - 0.5 * pm.ln() + ln_norm_cdf(-g / pm.sqrt());
            let prob_plus = 1.0 / (1.0 + (lw_m - lw_p).exp());
            let u = if rng.random::<f64>() < prob_plus {
                let (m, sd) = (g / pp, pp.sqrt().recip());
                m + sd * std_normal_above(rng, -m / sd)
            } else {
                let (m, sd) = (g / pm, pm.sqrt().recip());
                m - sd * std_normal_above(rng, m / sd)
            };
            st.u[k] = u;
            st.resid.axpy(-u, &col, 1.0);
        }
    }

    fn fsn_ln(family: FsnFamily, u: f64, sigma: f64, lambda: f64) -> f64 {
        let z = u / sigma;
        family.ln_p_at_normal_score(z, lambda) + ln_norm_pdf(z) - sigma.ln()
    }

    fn draw_u_fsn<R: Rng>(&self, rng: &mut R, st: &mut State, family: FsnFamily, blocks: &mut [Adapt], it: usize) {
        let v0 = st.sigma[0] * st.sigma[0];
        for k in 0..self.z.ncols() {
            let f = self.factor[k];
            let (s, lambda) = (st.sigma[f + 1], st.shape[f]);
            let col = self.z.column(k);
            st.resid.axpy(st.u[k], &col, 1.0);
            let g = col.dot(&st.resid) / v0;
            let rho = self.z_norm2[k] / v0;
            let target = |u: f64| -0.5 * rho * u * u + g * u + Self::fsn_ln(family, u, s, lambda);
            let cur = st.u[k];
            let sd = blocks[f].step() / (rho + 1.0 / (s * s)).sqrt();
            let prop = cur + sd * rng.sample::<f64, _>(StandardNormal);
            let ok = accept(rng, target(prop) - target(cur));
            blocks[f].record(ok, it, self.burn_in, self.tuning);
            if ok {
                st.u[k] = prop;
            }
            st.resid.axpy(-st.u[k], &col, 1.0);
        }
    }

    /// `Σ u² / (2c²)` per factor, with `c` the TPN side scale (or 1).
    fn scale_sums(&self, st: &State) -> Vec<f64> {
        (0..self.r())
            .map(|i| {
                let range = self.ranges[i].clone();
                match self.family {
                    Family::Tpn(param) => {
                        let (a, b) = param.scales_unchecked(st.shape[i]);
                        st.u.as_slice()[range]
                            .iter()
                            .map(|&u| {
                                let c = if u < 0.0 { b } else { a };
                                0.5 * (u / c).powi(2)
                            })
                            .sum()
                    }
                    _ => {
                        let t = st.tau.get(i).copied().unwrap_or(1.0);
                        0.5 * t * st.u.as_slice()[range].iter().map(|u| u * u).sum::<f64>()
                    }
                }
            })
            .collect()
    }

    fn draw_sigma0<R: Rng>(&self, rng: &mut R, st: &mut State) -> Option<()> {
        let n = self.y.len() as f64;
        let shape = self.prior.a0().to_f64() + 0.5 * n;
        let rate = self.prior.b0().to_f64() + 0.5 * st.resid.norm_squared();
        st.sigma[0] = inv_gamma(rng, shape, rate)?.sqrt();
        Some(())
    }

    fn draw_sigmas_exact<R: Rng>(&self, rng: &mut R, st: &mut State) -> Option<()> {
        let sums = self.scale_sums(st);
        for (i, s_i) in sums.into_iter().enumerate() {
            let qi = self.ranges[i].len() as f64;
            let v = match self.prior {
                PriorStructure::PowerExp { a, b } => {
                    inv_gamma(rng, a[i + 1].to_f64() + 0.5 * qi, b[i + 1].to_f64() + s_i)?
                }
                PriorStructure::HalfCauchy { s, .. } => {
                    let v = inv_gamma(rng, 0.5 + 0.5 * qi, 1.0 / st.xi[i] + s_i)?;
                    st.xi[i] = inv_gamma(rng, 1.0, 1.0 / (s[i] * s[i]) + 1.0 / v)?;
                    v
                }
            };
            st.sigma[i + 1] = v.sqrt();
        }
        Some(())
    }

    fn draw_sigmas_fsn<R: Rng>(&self, rng: &mut R, st: &mut State, family: FsnFamily, blocks: &mut [Adapt], it: usize) {
        for i in 0..self.r() {
            let us = &st.u.as_slice()[self.ranges[i].clone()];
            let lambda = st.shape[i];
            let target = |t: f64| {
                let s = t.exp();
                self.prior.ln_kernel(i + 1, s) + t + us.iter().map(|&u| Self::fsn_ln(family, u, s, lambda)).sum::<f64>()
            };
            let cur = st.sigma[i + 1].ln();
            let prop = cur + blocks[i].step() * rng.sample::<f64, _>(StandardNormal);
            let ok = accept(rng, target(prop) - target(cur));
            blocks[i].record(ok, it, self.burn_in, self.tuning);
            if ok {
                st.sigma[i + 1] = prop.exp();
            }
        }
    }

    fn draw_tau<R: Rng>(&self, rng: &mut R, st: &mut State) -> Option<()> {
        let delta = st.shape[0];
        for i in 0..self.r() {
            let qi = self.ranges[i].len() as f64;
            let ss: f64 = st.u.as_slice()[self.ranges[i].clone()].iter().map(|u| u * u).sum();
            let shape = 0.5 * delta + 0.5 * qi;
            let rate = 0.5 * delta + 0.5 * ss / st.sigma[i + 1].powi(2);
            let t: f64 = Gamma::new(shape, 1.0 / rate).ok()?.sample(rng);
            if !(t > 0.0 && t.is_finite()) {
                return None;
            }
            st.tau[i] = t;
        }
        Some(())
    }

    /// Log likelihood contribution of shape slot `j` at value `x`.
    fn shape_ln_lik(&self, st: &State, j: usize, x: f64) -> f64 {
        match self.family {
            Family::Tpn(param) => {
                let (a, b) = param.scales_unchecked(x);
                let s = st.sigma[j + 1];
                let lnorm = std::f64::consts::LN_2 - (s * (a + b)).ln();
                st.u.as_slice()[self.ranges[j].clone()]
                    .iter()
                    .map(|&u| {
                        let c = if u < 0.0 { b } else { a };
                        lnorm + ln_norm_pdf(u / (s * c))
                    })
                    .sum()
            }
            Family::Fsn(family) => {
                let s = st.sigma[j + 1];
                st.u.as_slice()[self.ranges[j].clone()]
                    .iter()
                    .map(|&u| Self::fsn_ln(family, u, s, x))
                    .sum()
            }
            Family::Smn(mixing) => st.tau.iter().map(|&t| mixing.ln_density(t, x).unwrap_or(0.0)).sum(),
            Family::Normal => 0.0,
        }
    }

    fn draw_shapes<R: Rng>(&self, rng: &mut R, st: &mut State, blocks: &mut [Adapt], it: usize) {
        let Some(info) = &self.shape else { return };
        if info.fixed.is_some() {
            return;
        }
        let tr = info.transform;
        let domain_ok = |x: f64| match self.family {
            Family::Tpn(param) => param.domain().contains(x),
            _ => true,
        };
        for j in 0..st.shape.len() {
            let target = |t: f64| {
                let (x, ln_jac) = tr.inverse(t);
                if !(tr.contains(x) && domain_ok(x)) {
                    return f64::NEG_INFINITY;
                }
                let lp = info.prior.ln_pdf(x).unwrap_or(f64::NEG_INFINITY);
                self.shape_ln_lik(st, j, x) + lp + ln_jac
            };
            let cur = tr.to_real(st.shape[j]);
            let prop = cur + blocks[j].step() * rng.sample::<f64, _>(StandardNormal);
            let ok = accept(rng, target(prop) - target(cur));
            blocks[j].record(ok, it, self.burn_in, self.tuning);
            if ok {
                st.shape[j] = tr.inverse(prop).0;
            }
        }
    }

    fn row(&self, st: &State) -> Vec<f64> {
        st.beta
            .iter()
            .chain(st.u.iter())
            .chain(&st.sigma)
            .chain(&st.shape)
            .chain(&st.tau)
            .copied()
            .collect()
    }
}

pub(super) fn run(
    spec: &ModelSpec,
    y: &DVector<f64>,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    chain: u64,
    tuning: &Tuning,
) -> Result<ChainOutput> {
    if burn_in > iterations {
        return Err(Error::Configuration(format!(
            "burn-in {burn_in} exceeds the {iterations} iterations"
        )));
    }
    let sm = Sampler::new(spec, y, tuning, burn_in)?;
    let names = names(spec);
    let mut st = sm.initial_state(&names)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);

    let r = sm.r();
    let step = tuning.initial_step;
    let free_shapes = sm.shape.as_ref().is_some_and(|s| s.fixed.is_none());
    let fsn = matches!(sm.family, Family::Fsn(_));
    let mut u_blocks: Vec<Adapt> = if fsn { (0..r).map(|_| Adapt::new(step)).collect() } else { Vec::new() };
    let mut sigma_blocks: Vec<Adapt> =
        if fsn && tuning.fixed_scales.is_none() { (0..r).map(|_| Adapt::new(step)).collect() } else { Vec::new() };
    let mut shape_blocks: Vec<Adapt> =
        if free_shapes { (0..sm.n_shapes()).map(|_| Adapt::new(step)).collect() } else { Vec::new() };

    let fail = |it: usize, st: &State, what: &str| Error::NonFinite {
        iteration: it,
        state: format!("{what}; {}", st.dump()),
    };

    let mut draws = Vec::with_capacity(iterations - burn_in);
    for it in 0..iterations {
        sm.draw_beta(&mut rng, &mut st);
        match sm.family {
            Family::Normal | Family::Smn(_) => {
                let prec: Vec<f64> = (0..sm.z.ncols())
                    .map(|k| {
                        let f = sm.factor[k];
                        st.tau.get(f).copied().unwrap_or(1.0) / st.sigma[f + 1].powi(2)
                    })
                    .collect();
                sm.draw_u_gaussian(&mut rng, &mut st, &prec)
                    .ok_or_else(|| fail(it, &st, "u precision not positive definite"))?;
            }
            Family::Tpn(param) => sm.draw_u_tpn(&mut rng, &mut st, param),
            Family::Fsn(family) => sm.draw_u_fsn(&mut rng, &mut st, family, &mut u_blocks, it),
        }
        if tuning.fixed_scales.is_none() {
            sm.draw_sigma0(&mut rng, &mut st)
                .ok_or_else(|| fail(it, &st, "σ₀ full conditional is not a proper inverse gamma"))?;
            match sm.family {
                Family::Fsn(family) => sm.draw_sigmas_fsn(&mut rng, &mut st, family, &mut sigma_blocks, it),
                _ => sm
                    .draw_sigmas_exact(&mut rng, &mut st)
                    .ok_or_else(|| fail(it, &st, "σᵢ full conditional is not a proper inverse gamma"))?,
            }
        }
        if sm.n_tau() > 0 {
            sm.draw_tau(&mut rng, &mut st)
                .ok_or_else(|| fail(it, &st, "τ full conditional is not a proper gamma"))?;
        }
        sm.draw_shapes(&mut rng, &mut st, &mut shape_blocks, it);
        if !st.finite() {
            return Err(fail(it, &st, "non-finite state"));
        }
        if it >= burn_in {
            draws.push(sm.row(&st));
        }
    }

    let mut acceptance_rates = BTreeMap::new();
    for (i, b) in u_blocks.iter().enumerate() {
        acceptance_rates.insert(format!("u_factor_{}", i + 1), b.rate());
    }
    for (i, b) in sigma_blocks.iter().enumerate() {
        acceptance_rates.insert(format!("sigma_{}", i + 1), b.rate());
    }
    let shape_name = match sm.family {
        Family::Tpn(_) => "gamma",
        Family::Fsn(_) => "lambda",
        _ => "delta",
    };
    for (i, b) in shape_blocks.iter().enumerate() {
        let key = if shape_name == "delta" { "delta".to_string() } else { format!("{shape_name}_{}", i + 1) };
        acceptance_rates.insert(key, b.rate());
    }

    let mut out = ChainOutput {
        names,
        draws,
        seed,
        chain,
        acceptance_rates,
        diagnostics: DiagnosticsReport::default(),
    };
    out.diagnostics = diagnostics(std::slice::from_ref(&out))?;
    Ok(out)
}
