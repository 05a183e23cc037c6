//! Discrete-event simulation of a proof-of-work network whose nodes may have
//! to consult an off-chain resource server, plus the closed-form load model
//! the simulation is checked against.

pub mod analytic;
pub mod config;
pub mod engine;
pub mod report;
pub mod rs_queue;
pub mod sweep;

pub use analytic::{overload_drop_fraction, predicted_amplification, DomainError, LoadModel};
pub use config::{Mode, SimConfig, SimError, SweepAxis};
pub use engine::{run_simulation, run_simulation_with_series, EventKind, SimEvent};
pub use report::{series_csv, LatencyStats, SeriesRow, SimReport};
pub use rs_queue::{model_rs, RsAccounting, RsOutcome, RsQueue};
pub use sweep::{cell_seed, run_sweep, run_sweep_with};

/// Load model evaluated in floating point.
pub type LoadModelF64 = LoadModel<f64>;
/// Load model evaluated exactly over rationals.
pub type LoadModelExact = LoadModel<num_rational::Ratio<i64>>;
