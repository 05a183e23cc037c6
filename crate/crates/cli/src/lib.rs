//! Library side of the `permchain` command: key derivation, scenario
//! scripting and report tables. The binary is a thin argument parser over
//! these.

pub mod keys;
pub mod scenario;
pub mod table;

pub use keys::{key_from_seed, seed_bytes, seed_u64, KeyInfo};
pub use scenario::{
    load_scenario, run_scenario, run_scenario_file, Scenario, ScenarioError, ScenarioRun,
    Transcript,
};
pub use table::{parse_reports, ratios, render_csv, render_text, ReportRow};
