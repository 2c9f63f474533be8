//! Synthetic regression instances and the norms measured on them.

mod instance;
mod norms;
pub mod rng;
mod target;

pub use instance::{gen_instance, DesignSpec, ProblemInstance};
pub use norms::{lr_norm, population_risk, pow_sum};
pub use target::{gen_target, Signs, TargetKind, TargetSpec};
