//! Caching policies behind one contract: classical LRU/LFU and the learned
//! PPO agents.

mod learned;
mod lfu;
mod lru;

use std::fmt;
use std::str::FromStr;

pub use learned::{LearnedPolicy, LearnedPolicyConfig};
pub use lfu::{lfu_decide, LfuPolicy};
pub use lru::{lru_decide, LruPolicy};

use crate::error::{Error, Result};
use crate::rl::ActorCritic;
use crate::sim::{
    reward_hit, CacheNode, CatalogEntry, FileId, Observation, RewardConstants, TimeStep,
};

/// What a policy wants done with a just-fetched file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyDecision {
    /// `0` skips caching, `j >= 1` writes slot `j`.
    pub action: usize,
    pub log_prob: Option<f64>,
    pub value: Option<f64>,
}

impl PolicyDecision {
    pub fn store_in(action: usize) -> Self {
        PolicyDecision {
            action,
            log_prob: None,
            value: None,
        }
    }
}

/// Which reward signal a learning policy trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    /// Hit-rate reward plus penalties for entries that expire unused.
    Proposed,
    /// Hit-rate reward minus mean freshness of the cached entries.
    FreshnessBaseline,
}

/// Everything a policy sees at a decision event.
pub struct DecisionContext<'a> {
    pub t: TimeStep,
    pub node: &'a CacheNode,
    pub requested: &'a CatalogEntry,
    pub observation: &'a Observation,
    /// Reward for this node's previous decision, computed with the policy's
    /// [`RewardKind`]. `None` for non-learning policies.
    pub reward: Option<f64>,
}

pub trait CachePolicy: Send {
    fn name(&self) -> &'static str;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<PolicyDecision>;

    /// A request for `file_id` reached this node (hit or miss).
    fn on_request(&mut self, _file_id: FileId, _t: TimeStep) {}

    /// This node served `file_id` from its cache.
    fn on_hit(&mut self, _file_id: FileId, _t: TimeStep) {}

    /// `file_id` was written into 0-based `slot` after a decision.
    fn on_insert(&mut self, _slot: usize, _file_id: FileId, _t: TimeStep) {}

    fn on_step_end(&mut self, _t: TimeStep) {}

    /// Called once when an episode finishes.
    fn end_episode(&mut self) {}

    fn reward_kind(&self) -> Option<RewardKind> {
        None
    }

    fn is_learning(&self) -> bool {
        false
    }

    /// Switches learning policies between training and frozen evaluation.
    fn set_training(&mut self, _training: bool) {}

    /// Parameters of a learning policy.
    fn network(&self) -> Option<&ActorCritic> {
        None
    }

    /// Installs parameters, e.g. from a checkpoint.
    fn set_network(&mut self, _net: ActorCritic) -> Result<()> {
        Err(Error::Checkpoint(format!(
            "{} has no parameters",
            self.name()
        )))
    }
}

/// Policy names accepted by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Lru,
    Lfu,
    DrlFreshness,
    PpoProposed,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Lru,
        PolicyKind::Lfu,
        PolicyKind::DrlFreshness,
        PolicyKind::PpoProposed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::DrlFreshness => "drl-freshness",
            PolicyKind::PpoProposed => "ppo-proposed",
        }
    }

    pub fn is_learning(&self) -> bool {
        matches!(self, PolicyKind::DrlFreshness | PolicyKind::PpoProposed)
    }

    pub fn reward_kind(&self) -> Option<RewardKind> {
        match self {
            PolicyKind::DrlFreshness => Some(RewardKind::FreshnessBaseline),
            PolicyKind::PpoProposed => Some(RewardKind::Proposed),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown policy `{s}` (valid: lru, lfu, drl-freshness, ppo-proposed)"
                ))
            })
    }
}

/// Flag carried by result files that include the freshness-driven baseline.
pub const DRL_REWARD_NOTE: &str =
    "drl-freshness reward is an approximation: K*c2/t - c3 * mean resident freshness";

/// Reward of the freshness-driven DRL baseline: `K * c2 / t` minus `c3`
/// times the mean freshness of resident entries (0 for an empty cache).
///
/// This is an approximation; the baseline's original reward is not
/// published in closed form. Drains the node's expiry buffer, which this
/// reward does not use.
pub fn baseline_drl_reward(node: &mut CacheNode, t: TimeStep, constants: &RewardConstants) -> f64 {
    node.drain_expired();
    let penalty = node.mean_freshness(t).unwrap_or(0.0);
    reward_hit(node.cumulative_hits(), t, constants.c2) - constants.c3 * penalty
}

/// Victim rule for the two-action variant: first empty slot, else the
/// stalest entry, fewest hits on ties, then lowest slot. Returns a slot
/// action in `1..=M`.
pub fn binary_victim(node: &CacheNode, t: TimeStep) -> usize {
    if let Some(i) = node.first_empty_slot() {
        return i + 1;
    }
    let mut best: Option<(usize, f64, u64)> = None;
    for (i, f) in node.slots().iter().enumerate() {
        let f = f.as_ref().expect("full node");
        let fr = f.freshness(t);
        let better = match best {
            None => true,
            Some((_, bf, bh)) => fr > bf || (fr == bf && f.hits < bh),
        };
        if better {
            best = Some((i, fr, f.hits));
        }
    }
    best.map(|(i, _, _)| i + 1)
        .expect("node has at least one slot")
}
