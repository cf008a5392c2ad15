//! Scenario files, run orchestration and output formats for the `lagrangia` binary.

pub mod error;
pub mod output;
pub mod plotdata;
pub mod run;
pub mod scenario;

pub use error::LabError;
pub use run::{run_scenario, Outcome, RunOptions};
pub use scenario::Scenario;
