use std::collections::HashMap;

use super::{CachePolicy, DecisionContext, PolicyDecision};
use crate::error::Result;
use crate::sim::{CacheNode, FileId, TimeStep};

/// Always caches: first empty slot, else the entry whose file has the fewest
/// requests at this node (lowest slot on ties).
pub fn lfu_decide(node: &CacheNode, frequency: &HashMap<FileId, u64>) -> PolicyDecision {
    if let Some(i) = node.first_empty_slot() {
        return PolicyDecision::store_in(i + 1);
    }
    let victim = node
        .slots()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            (
                i,
                frequency
                    .get(&f.expect("full").file_id)
                    .copied()
                    .unwrap_or(0),
            )
        })
        .min_by_key(|&(i, count)| (count, i))
        .map(|(i, _)| i)
        .expect("node has slots");
    PolicyDecision::store_in(victim + 1)
}

/// Request counts cover the whole run, hits and misses, without aging.
#[derive(Debug, Default, Clone)]
pub struct LfuPolicy {
    requests: HashMap<FileId, u64>,
}

impl LfuPolicy {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CachePolicy for LfuPolicy {
    fn name(&self) -> &'static str {
        "lfu"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<PolicyDecision> {
        Ok(lfu_decide(ctx.node, &self.requests))
    }

    fn on_request(&mut self, file_id: FileId, _t: TimeStep) {
        *self.requests.entry(file_id).or_default() += 1;
    }
}
