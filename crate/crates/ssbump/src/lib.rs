//! Scenario files, report formats and the command-line front end for the
//! smart speed bump simulator.

pub mod output;
pub mod scenario_file;

pub use scenario_file::{load_scenario, Diagnostic};

/// The shipped average-delay scenario checked by `ssbump table1`.
pub const TABLE1_SCENARIO: &str = include_str!("../scenarios/table1.scn");
