//! The data-free constant relating the SMN marginal likelihood to the
//! normal one.

use crate::distributions::MixingDistribution;
use crate::error::Result;
use crate::model::{Hyper, ShapePrior};
use crate::propriety::{shape_integral, ShapeIntegral};

/// `c = ∫ ∏ᵢ E[τ^{-aᵢ} | δ] π(δ) dδ`; `+∞` when a moment diverges on a
/// set of positive prior mass.
pub fn smn_constant(a_list: &[Hyper], mixing: MixingDistribution, delta_prior: &ShapePrior) -> Result<f64> {
    smn_constant_detail(a_list, mixing, delta_prior).map(|r| r.value)
}

pub fn smn_constant_detail(a_list: &[Hyper], mixing: MixingDistribution, delta_prior: &ShapePrior) -> Result<ShapeIntegral> {
    delta_prior.check_within(mixing.delta_domain(), "δ")?;
    if mixing == MixingDistribution::PointMass {
        return Ok(ShapeIntegral {
            value: 1.0,
            truncations: 0,
            last_rel_increment: 0.0,
        });
    }
    let s: Vec<f64> = a_list.iter().map(|a| -a.to_f64()).collect();
    // kinks where a moment ceases to exist
    let breaks: Vec<f64> = s.iter().filter(|&&v| v < 0.0).map(|&v| -2.0 * v).collect();
    shape_integral(
        |delta| s.iter().map(|&si| mixing.moment(si, delta)).product(),
        delta_prior,
        &breaks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::ln_gamma;

    #[test]
    fn worked_values() {
        let half = [Hyper::new(-1, 2)];
        let at = |d: f64| ShapePrior::PointMass { at: d };
        assert_eq!(smn_constant(&half, MixingDistribution::PointMass, &at(3.0)).unwrap(), 1.0);
        let c2 = smn_constant(&half, MixingDistribution::StudentT, &at(2.0)).unwrap();
        assert!((c2 - 0.886_226_925_452_758).abs() < 1e-13);
        let c4 = smn_constant(&half, MixingDistribution::StudentT, &at(4.0)).unwrap();
        let exact = (ln_gamma(2.5) - ln_gamma(2.0)).exp() / 2f64.sqrt();
        assert!((c4 - exact).abs() < 1e-13 && (c4 - 0.939_985_602_986_625).abs() < 1e-13);
    }

    #[test]
    fn integrates_over_delta_prior() {
        // E[τ^{1/2} | δ] averaged over δ ~ Gamma(3, 1), checked by a plain
        // midpoint rule
        let prior = ShapePrior::Gamma { shape: 3.0, rate: 1.0 };
        let c = smn_constant(&[Hyper::new(-1, 2), Hyper::new(-1, 2)], MixingDistribution::StudentT, &prior).unwrap();
        let n = 200_000;
        let brute: f64 = (0..n)
            .map(|j| {
                let d = (j as f64 + 0.5) * 60.0 / n as f64;
                let m = MixingDistribution::StudentT.moment(0.5, d);
                m * m * prior.pdf(d).unwrap() * 60.0 / n as f64
            })
            .sum();
        assert!((c - brute).abs() < 1e-7, "{c} {brute}");
    }

    #[test]
    fn divergent_moment() {
        // a = 1 needs δ/2 > 1; a uniform δ prior on (0.5, 4) reaches below
        let prior = ShapePrior::Uniform { lo: 0.5, hi: 4.0 };
        let c = smn_constant(&[Hyper::integer(1)], MixingDistribution::StudentT, &prior).unwrap();
        assert!(c.is_infinite());
        let ok = ShapePrior::Uniform { lo: 3.0, hi: 4.0 };
        assert!(smn_constant(&[Hyper::integer(1)], MixingDistribution::StudentT, &ok).unwrap().is_finite());
    }
}
