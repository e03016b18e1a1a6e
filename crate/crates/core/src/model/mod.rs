//! Model definition: designs, factor structure, priors and the derived
//! ranks that the propriety conditions depend on.

pub mod design;
pub mod hyper;
pub mod prior;
pub mod probit;
pub mod shape_prior;
pub mod spec;

pub use hyper::Hyper;
pub use prior::PriorStructure;
pub use probit::ProbitSpec;
pub use shape_prior::ShapePrior;
pub use spec::{effective_rank_t, effective_rank_t_with, sse, ModelSpec, ReFamily};
