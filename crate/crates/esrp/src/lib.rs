//! Scenario files, run outputs, parameter sweeps and the `esrp` command line
//! on top of [`esrp_core`].

pub mod cli;
pub mod output;
pub mod scenario;
pub mod sweep;

pub use scenario::{set_param, Scenario, ScenarioError};
