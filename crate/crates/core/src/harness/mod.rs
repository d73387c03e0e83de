//! Experiment runner: configuration, the (w, alpha, policy, topology,
//! replicate) grid, train/evaluate phases, seeding and result files.

mod check;
mod config;
mod output;
mod runner;
mod seeds;

pub use check::{random_trace, replay_policy, run_checks, CheckResult};
pub use config::{parse_config, RunConfig, CONFIG_KEYS};
pub use output::{manifest_text, write_outputs, OutputFiles};
pub use runner::{
    build_environment, flat_comparison_config, grid_cells, run_cell, run_flat_comparison, run_grid,
    run_grid_with, save_checkpoints, Cell, CellOutcome, GridResult, NodeNetwork,
};
pub use seeds::{derive_seed, real_key};
