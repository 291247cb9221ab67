//! Scenario-file front end for the `nonadiabat` library.

mod commands;
mod error;
mod scenario;

pub use commands::{run_command, EquivalenceSummary, RunOptions, RunReport, Verb};
pub use error::CliError;
pub use scenario::{
    parse_scenario, parse_scenario_str, Body, Kind, KrausScenario, LindbladScenario, RunSpec, Scenario,
    ScenarioTolerances, SCHEMA_VERSION,
};
