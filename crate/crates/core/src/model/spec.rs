use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::prior::PriorStructure;
use super::shape_prior::ShapePrior;
use crate::distributions::{FsnFamily, Interval, MixingDistribution, SkewParameterisation};
use crate::error::{Error, Result};
use crate::numeric::linalg::{horizontal_concat, largest_singular_value, rank, rank_with_reference, residual_basis, RankTolerance};

/// Distribution of the random effects `u_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReFamily {
    Normal,
    /// Two-piece normal with one `γᵢ` per factor, each `~ prior`.
    Tpn { param: SkewParameterisation, prior: ShapePrior },
    /// FSN transform of the normal with one `λᵢ` per factor.
    Fsn { family: FsnFamily, prior: ShapePrior },
    /// Scale mixture of normals; a single `δ` shared by all factors.
    Smn { mixing: MixingDistribution, prior: ShapePrior },
}

impl ReFamily {
    pub fn name(&self) -> String {
        match self {
            ReFamily::Normal => "normal".into(),
            ReFamily::Tpn { param, .. } => format!("tpn({})", param.name()),
            ReFamily::Fsn { family, .. } => format!("fsn({})", family.name()),
            ReFamily::Smn { mixing, .. } => format!("smn({})", mixing.name()),
        }
    }

    pub fn shape_prior(&self) -> Option<&ShapePrior> {
        match self {
            ReFamily::Normal => None,
            ReFamily::Tpn { prior, .. } | ReFamily::Fsn { prior, .. } | ReFamily::Smn { prior, .. } => Some(prior),
        }
    }

    pub fn shape_domain(&self) -> Option<Interval> {
        match self {
            ReFamily::Normal => None,
            ReFamily::Tpn { param, .. } => Some(param.domain()),
            ReFamily::Fsn { family, .. } => Some(family.lambda_domain()),
            ReFamily::Smn { mixing, .. } => Some(mixing.delta_domain()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(p), Some(d)) = (self.shape_prior(), self.shape_domain()) {
            p.check_within(d, &self.name())?;
        }
        Ok(())
    }
}

/// `y = Xβ + Zu + ε` with `u = (u₁, .., u_r)` blocked by factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    factor_sizes: Vec<usize>,
    re_family: ReFamily,
    prior: PriorStructure,
    rank_tol: RankTolerance,
}

impl ModelSpec {
    pub fn new(
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        factor_sizes: Vec<usize>,
        re_family: ReFamily,
        prior: PriorStructure,
    ) -> Result<Self> {
        Self::with_rank_tolerance(x, z, factor_sizes, re_family, prior, RankTolerance::default())
    }

    pub fn with_rank_tolerance(
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        factor_sizes: Vec<usize>,
        re_family: ReFamily,
        prior: PriorStructure,
        rank_tol: RankTolerance,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if z.nrows() != n {
            return Err(Error::Dimension(format!("X has {n} rows but Z has {}", z.nrows())));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Configuration("design matrices contain non-finite entries".into()));
        }
        if p == 0 || n <= p {
            return Err(Error::Configuration(format!("need n > p ≥ 1, got n={n}, p={p}")));
        }
        let rx = rank(&x, rank_tol);
        if rx != p {
            return Err(Error::Configuration(format!("X is rank deficient: rank {rx} < p = {p}")));
        }
        if factor_sizes.is_empty() {
            return Err(Error::Configuration("at least one random-effect factor (r ≥ 1) is required".into()));
        }
        if factor_sizes.contains(&0) {
            return Err(Error::Configuration("every factor needs q_i ≥ 1 columns".into()));
        }
        let q: usize = factor_sizes.iter().sum();
        if q != z.ncols() {
            return Err(Error::Dimension(format!(
                "factor sizes sum to {q} but Z has {} columns",
                z.ncols()
            )));
        }
        prior.validate(factor_sizes.len())?;
        re_family.validate()?;
        Ok(Self {
            x,
            z,
            factor_sizes,
            re_family,
            prior,
            rank_tol,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
    pub fn factor_sizes(&self) -> &[usize] {
        &self.factor_sizes
    }
    pub fn re_family(&self) -> &ReFamily {
        &self.re_family
    }
    pub fn prior(&self) -> &PriorStructure {
        &self.prior
    }
    pub fn rank_tolerance(&self) -> RankTolerance {
        self.rank_tol
    }
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn q(&self) -> usize {
        self.z.ncols()
    }
    pub fn r(&self) -> usize {
        self.factor_sizes.len()
    }

    /// Column range of each factor inside `Z`.
    pub fn factor_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.factor_sizes
            .iter()
            .map(|&qi| {
                let r = start..start + qi;
                start += qi;
                r
            })
            .collect()
    }

    /// Factor index owning each column of `Z`.
    pub fn column_factor(&self) -> Vec<usize> {
        self.factor_sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &qi)| std::iter::repeat_n(i, qi))
            .collect()
    }

    pub fn with_prior(&self, prior: PriorStructure) -> Result<Self> {
        Self::with_rank_tolerance(
            self.x.clone(),
            self.z.clone(),
            self.factor_sizes.clone(),
            self.re_family.clone(),
            prior,
            self.rank_tol,
        )
    }

    pub fn with_family(&self, re_family: ReFamily) -> Result<Self> {
        Self::with_rank_tolerance(
            self.x.clone(),
            self.z.clone(),
            self.factor_sizes.clone(),
            re_family,
            self.prior.clone(),
            self.rank_tol,
        )
    }

    pub fn t(&self) -> usize {
        effective_rank_t_with(&self.x, &self.z, self.rank_tol).expect("dimensions checked at construction")
    }

    /// `rank(X : Z)`.
    pub fn rank_xz(&self) -> usize {
        let xz = horizontal_concat(&self.x, &self.z).expect("dimensions checked at construction");
        rank(&xz, self.rank_tol)
    }

    pub fn sse(&self, y: &DVector<f64>) -> Result<f64> {
        sse(y, &self.x)
    }

    pub fn check_data(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!("y has length {} but X has {} rows", y.len(), self.n())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("y contains non-finite values".into()));
        }
        Ok(())
    }
}

/// `t = rank{(I - X(XᵀX)⁻¹Xᵀ)Z}` with the default rank threshold.
pub fn effective_rank_t(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<usize> {
    effective_rank_t_with(x, z, RankTolerance::default())
}

/// The threshold is scaled by the largest singular value of `Z` itself:
/// a `Z` lying in the column space of `X` projects to rounding noise whose
/// own largest singular value is meaningless as a reference.
pub fn effective_rank_t_with(x: &DMatrix<f64>, z: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    if x.nrows() != z.nrows() {
        return Err(Error::Dimension(format!(
            "X has {} rows but Z has {}",
            x.nrows(),
            z.nrows()
        )));
    }
    // projecting onto an (n − p)-dimensional basis keeps t ≤ n − p exactly
    let w = residual_basis(x).transpose() * z;
    Ok(rank_with_reference(&w, largest_singular_value(z), tol))
}

/// `yᵀ(I - X(XᵀX)⁻¹Xᵀ)y`.
pub fn sse(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<f64> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "y has length {} but X has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    let r = residual_basis(x).transpose() * y;
    Ok(r.norm_squared())
}
