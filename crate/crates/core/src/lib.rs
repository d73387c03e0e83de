//! Simulation and learning toolkit for caching transient IoT data in a
//! two-layer (parent + leaf) edge network.
//!
//! The crate is organized bottom-up:
//!
//! * [`sim`]: the discrete-time environment: device catalog, Zipf request
//!   workload, cache nodes, lookup path, freshness bookkeeping and rewards.
//! * [`rl`]: a small from-scratch PPO implementation (actor-critic MLPs,
//!   clipped surrogate, value regression, checkpoints).
//! * [`policies`]: the caching-policy contract with LRU, LFU and the two
//!   learned agents.
//! * [`metrics`]: hit rate, energy, freshness and breakdowns, plus CSV and
//!   plot-data output.
//! * [`harness`]: configuration, seeded experiment grids and the oracle
//!   check suite used by the command line tool.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod policies;
pub mod rl;
pub mod sim;

pub use error::{Error, Result};
