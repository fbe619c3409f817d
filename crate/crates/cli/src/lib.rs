//! Experiment runner behind the `purity` binary.

pub mod experiments;
pub mod output;
pub mod spec;
pub mod validate;

pub use experiments::run_experiment;
pub use output::{Cell, Report, Table};
pub use spec::{Experiment, ExperimentSpec, Format};
pub use validate::{validate, ValidationReport};
