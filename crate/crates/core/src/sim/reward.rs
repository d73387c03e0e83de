use super::{CacheNode, TimeStep};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConstants {
    /// Expiry penalty coefficient.
    pub c1: f64,
    /// Hit-rate reward coefficient.
    pub c2: f64,
    /// Freshness penalty coefficient of the baseline agent.
    pub c3: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        RewardConstants {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        }
    }
}

/// Penalty for an entry leaving the cache through expiry:
/// `(sign(hits - 0.5) - 1) * c1` with `sign(x) = 1` for `x >= 0`, else `-1`.
/// Only never-hit entries are penalized, by `-2 * c1`.
pub fn reward_expire(hits: u64, c1: f64) -> f64 {
    let sign = if hits as f64 - 0.5 >= 0.0 { 1.0 } else { -1.0 };
    (sign - 1.0) * c1
}

/// Average hits per step so far: `K * c2 / t`.
pub fn reward_hit(cumulative_hits: u64, t_current: TimeStep, c2: f64) -> f64 {
    assert!(t_current >= 1, "hit reward is undefined at t = 0");
    cumulative_hits as f64 * c2 / t_current as f64
}

/// Reward emitted at a decision event: the node's hit reward plus the
/// penalties of entries that expired since its previous decision. Drains
/// the node's expiry buffer.
pub fn step_reward(node: &mut CacheNode, t: TimeStep, constants: &RewardConstants) -> f64 {
    let penalty: f64 = node
        .drain_expired()
        .into_iter()
        .map(|hits| reward_expire(hits, constants.c1))
        .sum();
    reward_hit(node.cumulative_hits(), t, constants.c2) + penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CachedFile, NodeRole};

    #[test]
    fn expiry_penalty_examples() {
        assert_eq!(reward_expire(0, 1.0), -2.0);
        assert_eq!(reward_expire(1, 1.0), 0.0);
        assert_eq!(reward_expire(5, 3.0), 0.0);
    }

    #[test]
    fn expiry_penalty_exhaustive() {
        for c1 in [0.5, 1.0, 2.5] {
            for hits in 0..=100 {
                let r = reward_expire(hits, c1);
                if hits == 0 {
                    assert_eq!(r, -2.0 * c1);
                } else {
                    assert_eq!(r, 0.0);
                }
            }
        }
    }

    #[test]
    fn hit_reward_examples() {
        assert_eq!(reward_hit(5, 10, 1.0), 0.5);
        assert_eq!(reward_hit(0, 100, 1.0), 0.0);
        assert_eq!(reward_hit(7, 7, 2.0), 2.0);
    }

    #[test]
    #[should_panic(expected = "t = 0")]
    fn hit_reward_at_zero_panics() {
        reward_hit(1, 0, 1.0);
    }

    fn node_with_hits(k: u64) -> CacheNode {
        let mut node = CacheNode::new(0, NodeRole::Leaf, 4);
        node.apply_cache_action(
            CachedFile {
                file_id: 1,
                t_gen: 0,
                lifetime: 100,
                hits: 0,
            },
            1,
        );
        for _ in 0..k {
            node.record_hit(0);
        }
        node
    }

    fn expire_unhit(node: &mut CacheNode, file_id: u32, slot: usize, t: TimeStep) {
        node.apply_cache_action(
            CachedFile {
                file_id,
                t_gen: t - 2,
                lifetime: 2,
                hits: 0,
            },
            slot,
        );
        node.evict_expired(t);
    }

    #[test]
    fn composite_reward() {
        let c = RewardConstants::default();
        let mut node = node_with_hits(5);
        expire_unhit(&mut node, 2, 2, 10);
        assert!((step_reward(&mut node, 10, &c) - (-1.5)).abs() < 1e-15);
        // buffer drained: hit reward alone
        assert_eq!(step_reward(&mut node, 10, &c), 0.5);
    }

    #[test]
    fn two_penalties_accumulate() {
        let c = RewardConstants::default();
        let mut node = node_with_hits(5);
        expire_unhit(&mut node, 2, 2, 8);
        expire_unhit(&mut node, 3, 3, 10);
        assert!((step_reward(&mut node, 10, &c) - (0.5 - 4.0)).abs() < 1e-15);
    }
}
