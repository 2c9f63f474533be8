//! Sweep orchestration, fitting and CSV output.

pub mod config;
pub mod csv;
pub mod diagnostics;
pub mod fit;
pub mod record;
pub mod sweep;

pub use config::{Selector, SweepConfig};
pub use csv::{read_csv, write_csv, CsvAppender};
pub use diagnostics::{diagnose_concentration, ConcentrationReport};
pub use fit::{detect_elbow, fit_loglog_slope, log_shift, ols, Elbow, Ols};
pub use record::{SweepRecord, SCHEMA};
pub use sweep::{instance_seed, run_sweep, theory_columns, TheoryColumns, THREADS_ENV};
