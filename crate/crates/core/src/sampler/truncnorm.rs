//! Draws from a standard normal restricted to `(α, ∞)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// `Z ~ N(0, 1) | Z > alpha`. Plain rejection below the mean, Robert's
/// translated-exponential proposal in the tail.
pub fn std_normal_above<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    if alpha <= 0.25 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > alpha {
                return z;
            }
        }
    }
    let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = alpha + e / rate;
        let u: f64 = rng.random();
        if u.ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}
