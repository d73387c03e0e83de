use std::collections::HashMap;

use super::{CachePolicy, DecisionContext, PolicyDecision};
use crate::error::Result;
use crate::sim::{CacheNode, FileId, TimeStep};

/// Always caches: first empty slot, else the least recently touched entry
/// (lowest slot on ties). Files missing from `recency` count as oldest.
pub fn lru_decide(node: &CacheNode, recency: &HashMap<FileId, u64>) -> PolicyDecision {
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
                recency.get(&f.expect("full").file_id).copied().unwrap_or(0),
            )
        })
        .min_by_key(|&(i, touched)| (touched, i))
        .map(|(i, _)| i)
        .expect("node has slots");
    PolicyDecision::store_in(victim + 1)
}

/// Recency is a logical clock advanced on every hit or insertion, so
/// touches within one time step stay ordered.
#[derive(Debug, Default, Clone)]
pub struct LruPolicy {
    clock: u64,
    last_touch: HashMap<FileId, u64>,
}

impl LruPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    fn touch(&mut self, file_id: FileId) {
        self.clock += 1;
        self.last_touch.insert(file_id, self.clock);
    }
}

impl CachePolicy for LruPolicy {
    fn name(&self) -> &'static str {
        "lru"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<PolicyDecision> {
        Ok(lru_decide(ctx.node, &self.last_touch))
    }

    fn on_hit(&mut self, file_id: FileId, _t: TimeStep) {
        self.touch(file_id);
    }

    fn on_insert(&mut self, _slot: usize, file_id: FileId, _t: TimeStep) {
        self.touch(file_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CachedFile, NodeRole};

    fn full_node(ids: &[FileId]) -> CacheNode {
        let mut node = CacheNode::new(0, NodeRole::Leaf, ids.len());
        for (i, &id) in ids.iter().enumerate() {
            node.apply_cache_action(
                CachedFile {
                    file_id: id,
                    t_gen: 0,
                    lifetime: 100,
                    hits: 0,
                },
                i + 1,
            );
        }
        node
    }

    #[test]
    fn evicts_least_recent() {
        let node = full_node(&[1, 2, 3]);
        let recency = HashMap::from([(1, 5), (2, 3), (3, 9)]);
        assert_eq!(lru_decide(&node, &recency).action, 2);
    }

    #[test]
    fn prefers_empty_slot() {
        let mut node = full_node(&[1, 2, 3]);
        node.evict_expired(100);
        let recency = HashMap::from([(1, 5), (2, 3), (3, 9)]);
        assert_eq!(lru_decide(&node, &recency).action, 1);
    }

    #[test]
    fn ties_break_to_lowest_slot() {
        let node = full_node(&[4, 5]);
        assert_eq!(lru_decide(&node, &HashMap::new()).action, 1);
    }
}
