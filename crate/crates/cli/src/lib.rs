//! Experiment harness: run configurations, the bandit loop driver, closed
//! form regret ceilings, CSV reports, and contract workloads.

pub mod bounds;
pub mod config;
pub mod report;
pub mod runner;
pub mod workloads;

pub use bounds::{compare_bound, lints_regret_bound, oful_regret_bound, regret_bound, BoundReport};
pub use config::{Algo, RunConfig};
pub use runner::{run_and_write, run_experiment, run_many, run_rep, RunOutput, RunSummary};
