//! Analytic propriety conditions for the posterior under improper priors.

pub mod checks;
pub mod integrals;
pub mod verdict;

pub use checks::{check, check_corollary1, check_probit, check_theorem1, check_theorem2};
pub use integrals::{
    condition_d, condition_d_integral, condition_e, condition_e_integral, condition_e_integral_max, shape_integral,
    ShapeIntegral,
};
pub use verdict::{ConditionReport, ConditionStatus, Num, Overall, ProprietyVerdict, TheoremCase};
