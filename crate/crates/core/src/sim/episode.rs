use rand::Rng;
use sha2::{Digest, Sha256};

use super::{
    generate_requests, lookup, step_reward, CachedFile, Catalog, EnergyLedger, HitLevel,
    ObservationScale, RewardConstants, TimeStep, Topology,
};
use crate::error::Result;
use crate::policies::{baseline_drl_reward, CachePolicy, DecisionContext, RewardKind};

pub const HOPS_LEAF: u64 = 1;
pub const HOPS_PARENT: u64 = 2;
pub const HOPS_SOURCE: u64 = 3;

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    /// Number of time steps; steps run `1..=horizon`.
    pub horizon: TimeStep,
    /// Mean requests per leaf per step.
    pub request_rate: f64,
    pub rewards: RewardConstants,
    pub scale: ObservationScale,
    /// Let the requesting leaf decide whether to keep a copy served by the
    /// parent. Decisions otherwise happen only on device fetches.
    pub decide_on_parent_hit: bool,
    pub record_transitions: bool,
}

/// One decision event at one node, completed by the node's next event.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub node: usize,
    pub t: TimeStep,
    pub observation: Vec<f64>,
    pub action: usize,
    /// Emitted at the node's next decision; `None` for the last event.
    pub reward: Option<f64>,
    pub next_observation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub horizon: TimeStep,
    pub total_requests: u64,
    pub leaf_hits: u64,
    pub parent_hits: u64,
    pub source_fetches: u64,
    pub energy: EnergyLedger,
    pub hop_total: u64,
    /// Per-step mean freshness of all resident entries, sampled after
    /// eviction; steps with every cache empty are skipped.
    pub freshness_samples: Vec<f64>,
    /// `[leaf][file_id - 1]` requests issued in each region.
    pub requests_by_region: Vec<Vec<u64>>,
    /// `[leaf][file_id - 1]` cache hits (leaf or parent) for each region.
    pub hits_by_region: Vec<Vec<u64>>,
    /// Final `K` per node id.
    pub node_hits: Vec<u64>,
    pub decisions: u64,
    pub cache_writes: u64,
    pub transitions: Vec<TransitionRecord>,
}

impl EpisodeTrace {
    fn new(topology: &Topology, catalog: &Catalog, horizon: TimeStep) -> Self {
        let n_leaves = topology.n_leaves();
        EpisodeTrace {
            horizon,
            total_requests: 0,
            leaf_hits: 0,
            parent_hits: 0,
            source_fetches: 0,
            energy: EnergyLedger::new(catalog.len(), 1.0),
            hop_total: 0,
            freshness_samples: Vec::new(),
            requests_by_region: vec![vec![0; catalog.len()]; n_leaves],
            hits_by_region: vec![vec![0; catalog.len()]; n_leaves],
            node_hits: vec![0; topology.n_nodes()],
            decisions: 0,
            cache_writes: 0,
            transitions: Vec::new(),
        }
    }

    pub fn cache_hits(&self) -> u64 {
        self.leaf_hits + self.parent_hits
    }

    /// SHA-256 over every recorded quantity, for determinism checks.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: u64| h.update(x.to_le_bytes());
        for x in [
            self.horizon,
            self.total_requests,
            self.leaf_hits,
            self.parent_hits,
            self.source_fetches,
            self.hop_total,
            self.decisions,
            self.cache_writes,
        ] {
            put(x);
        }
        self.energy.cycles().iter().for_each(|&c| put(c));
        self.freshness_samples.iter().for_each(|f| put(f.to_bits()));
        for row in self.requests_by_region.iter().chain(&self.hits_by_region) {
            row.iter().for_each(|&c| put(c));
        }
        self.node_hits.iter().for_each(|&c| put(c));
        for tr in &self.transitions {
            put(tr.node as u64);
            put(tr.t);
            put(tr.action as u64);
            put(tr.reward.map_or(u64::MAX, f64::to_bits));
            tr.observation.iter().for_each(|x| put(x.to_bits()));
            for x in tr.next_observation.iter().flatten() {
                put(x.to_bits());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Runs `cfg.horizon` steps. Each step: expire stale entries at every node,
/// then generate and serve each leaf's requests in order. A device fetch
/// asks the parent's policy and then the requesting leaf's policy whether
/// (and where) to store the fresh copy.
///
/// `policies[i]` drives node `i` (leaves first, then the parent). `rng`
/// drives the request workload only, so the request sequence does not
/// depend on cache decisions.
pub fn run_episode<R: Rng + ?Sized>(
    topology: &mut Topology,
    catalog: &Catalog,
    policies: &mut [Box<dyn CachePolicy>],
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    assert_eq!(
        policies.len(),
        topology.n_nodes(),
        "one policy per caching node is required"
    );
    let mut trace = EpisodeTrace::new(topology, catalog, cfg.horizon);
    let mut pending: Vec<Option<TransitionRecord>> = vec![None; topology.n_nodes()];
    let parent_id = topology.parent_id();

    for t in 1..=cfg.horizon {
        let mut fresh_sum = 0.0;
        let mut fresh_n = 0usize;
        for node in topology.nodes_mut() {
            node.evict_expired(t);
            for f in node.slots().iter().flatten() {
                fresh_sum += f.freshness(t);
                fresh_n += 1;
            }
        }
        if fresh_n > 0 {
            trace.freshness_samples.push(fresh_sum / fresh_n as f64);
        }

        for leaf in 0..topology.n_leaves() {
            let requests =
                generate_requests(t, leaf, topology.region(leaf), cfg.request_rate, rng)?;
            for request in requests {
                let file_id = request.file_id;
                let idx = file_id as usize - 1;
                trace.total_requests += 1;
                trace.requests_by_region[leaf][idx] += 1;
                policies[leaf].on_request(file_id, t);

                match lookup(topology, &request, &mut trace.energy) {
                    HitLevel::Leaf => {
                        trace.leaf_hits += 1;
                        trace.hop_total += HOPS_LEAF;
                        trace.hits_by_region[leaf][idx] += 1;
                        policies[leaf].on_hit(file_id, t);
                    }
                    HitLevel::Parent => {
                        let parent = parent_id.expect("parent hit without a parent");
                        trace.parent_hits += 1;
                        trace.hop_total += HOPS_PARENT;
                        trace.hits_by_region[leaf][idx] += 1;
                        policies[parent].on_request(file_id, t);
                        policies[parent].on_hit(file_id, t);
                        if cfg.decide_on_parent_hit {
                            let node = topology.node(parent);
                            let copy = node.slots()[node.find(file_id).expect("parent copy")]
                                .expect("parent copy");
                            decide(
                                topology,
                                catalog,
                                policies,
                                cfg,
                                &mut trace,
                                &mut pending,
                                leaf,
                                copy,
                                t,
                            )?;
                        }
                    }
                    HitLevel::Source => {
                        trace.source_fetches += 1;
                        trace.hop_total += HOPS_SOURCE;
                        let fresh = CachedFile::generated(catalog.entry(file_id), t);
                        if let Some(parent) = parent_id {
                            policies[parent].on_request(file_id, t);
                            decide(
                                topology,
                                catalog,
                                policies,
                                cfg,
                                &mut trace,
                                &mut pending,
                                parent,
                                fresh,
                                t,
                            )?;
                        }
                        decide(
                            topology,
                            catalog,
                            policies,
                            cfg,
                            &mut trace,
                            &mut pending,
                            leaf,
                            fresh,
                            t,
                        )?;
                    }
                }
            }
        }

        for p in policies.iter_mut() {
            p.on_step_end(t);
        }
    }

    for p in policies.iter_mut() {
        p.end_episode();
    }
    if cfg.record_transitions {
        trace.transitions.extend(pending.into_iter().flatten());
    }
    for node in topology.nodes() {
        trace.node_hits[node.id()] = node.cumulative_hits();
    }
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn decide(
    topology: &mut Topology,
    catalog: &Catalog,
    policies: &mut [Box<dyn CachePolicy>],
    cfg: &EpisodeConfig,
    trace: &mut EpisodeTrace,
    pending: &mut [Option<TransitionRecord>],
    node_id: usize,
    file: CachedFile,
    t: TimeStep,
) -> Result<()> {
    let policy = &mut policies[node_id];
    let node = topology.node_mut(node_id);
    let requested = catalog.entry(file.file_id);
    let observation = node.observe(requested, t, &cfg.scale);
    let reward = match policy.reward_kind() {
        Some(RewardKind::Proposed) => Some(step_reward(node, t, &cfg.rewards)),
        Some(RewardKind::FreshnessBaseline) => Some(baseline_drl_reward(node, t, &cfg.rewards)),
        None => {
            node.drain_expired();
            None
        }
    };
    let ctx = DecisionContext {
        t,
        node,
        requested,
        observation: &observation,
        reward,
    };
    let decision = policy.decide(&ctx)?;
    trace.decisions += 1;
    if decision.action > 0 {
        node.apply_cache_action(file, decision.action);
        policy.on_insert(decision.action - 1, file.file_id, t);
        trace.cache_writes += 1;
    }

    if cfg.record_transitions {
        if let Some(mut prev) = pending[node_id].take() {
            prev.reward = reward;
            prev.next_observation = Some(observation.as_slice().to_vec());
            trace.transitions.push(prev);
        }
        pending[node_id] = Some(TransitionRecord {
            node: node_id,
            t,
            observation: observation.into_vec(),
            action: decision.action,
            reward: None,
            next_observation: None,
        });
    }
    Ok(())
}
