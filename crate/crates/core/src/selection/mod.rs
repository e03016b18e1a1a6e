//! Bayes factors: Savage–Dickey density ratios, the SMN constant and a
//! numerical check of its data independence.

pub mod invariance;
pub mod savage_dickey;
pub mod smn;

pub use invariance::{smn_bf_invariance_demo, InvarianceOptions, InvarianceReport, SmnModel};
pub use savage_dickey::{savage_dickey, SavageDickey};
pub use smn::{smn_constant, smn_constant_detail};
