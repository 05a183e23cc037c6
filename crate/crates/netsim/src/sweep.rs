use permchain_core::crypto::hash_parts;
use rayon::prelude::*;

use crate::config::{SimConfig, SimError, SweepAxis};
use crate::engine::run_simulation;
use crate::report::SimReport;

/// Seed for sweep cell `index`, derived from the base seed.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    let d = hash_parts(&[&seed.to_be_bytes(), &(index as u64).to_be_bytes()]);
    u64::from_be_bytes(d.0[..8].try_into().expect("8 bytes"))
}

/// One report per value, computed in parallel. When `reseed` is false every
/// cell keeps the base seed, which isolates the effect of the swept axis.
pub fn run_sweep_with(
    base: &SimConfig,
    axis: &str,
    values: &[f64],
    reseed: bool,
) -> Result<Vec<SimReport>, SimError> {
    let axis: SweepAxis = axis.parse()?;
    let cells: Vec<SimConfig> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v);
            if reseed {
                cfg.seed = cell_seed(base.seed, i);
            }
            cfg
        })
        .collect();
    for c in &cells {
        c.validate()?;
    }
    cells.par_iter().map(run_simulation).collect()
}

/// Sweep with a per-cell seed derived from `base.seed` and the cell index.
pub fn run_sweep(base: &SimConfig, axis: &str, values: &[f64]) -> Result<Vec<SimReport>, SimError> {
    run_sweep_with(base, axis, values, true)
}
