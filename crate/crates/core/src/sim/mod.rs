//! Discrete-time environment for the two-layer caching network.

mod catalog;
mod episode;
mod node;
mod reward;
mod topology;
mod workload;
mod zipf;

pub use catalog::{build_catalog, Catalog, CatalogEntry};
pub use episode::{
    run_episode, EpisodeConfig, EpisodeTrace, TransitionRecord, HOPS_LEAF, HOPS_PARENT, HOPS_SOURCE,
};
pub use node::{
    compute_freshness, is_expired, CacheNode, CachedFile, NodeRole, Observation, ObservationScale,
};
pub use reward::{reward_expire, reward_hit, step_reward, RewardConstants};
pub use topology::{lookup, EnergyLedger, HitLevel, Topology, TopologyMode};
pub use workload::{generate_requests, RegionPopularity, Request};
pub use zipf::zipf_pmf;

/// Simulation time step. Step 0 is the empty initial state; requests are
/// processed from step 1 onwards.
pub type TimeStep = u64;

/// File (and device) identifier, dense in `1..=N`.
pub type FileId = u32;
