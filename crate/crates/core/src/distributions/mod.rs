//! Random-effects densities: two-piece normal, Ferreira–Steel transforms
//! of the normal, and scale mixtures of normals.

pub mod fsn;
pub mod skew;
pub mod smn;
pub mod tpn;

pub use fsn::{fsn_ln_pdf, fsn_pdf, fsn_sample, FsnFamily};
pub use skew::{h_gamma, max_ab, H_gamma, Interval, ParameterisationRegistry, SkewParameterisation};
pub use smn::{smn_pdf, MixingDistribution};
pub use tpn::{tpn_cdf, tpn_ln_pdf, tpn_pdf, tpn_sample};
