//! Minimum-ℓp interpolation in overparameterized Gaussian linear regression.
//!
//! The crate covers four layers:
//!
//! * [`model`]: synthetic instances, target vectors, norms and population risk.
//! * [`solver`]: the min-ℓp interpolator computed through its concave dual.
//! * [`theory`]: closed-form ℓr scaling predictions (ray scale, `n★`, `r★`).
//! * [`dln`] and [`calib`]: diagonal linear networks and the α ↦ p_eff map.
//!
//! [`harness`] ties them together into reproducible sweeps written to CSV.

pub mod calib;
pub mod dln;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
