use super::{binary_victim, CachePolicy, DecisionContext, PolicyDecision, PolicyKind, RewardKind};
use crate::error::{Error, Result};
use crate::rl::{ActorCritic, PpoAgent, PpoHyperparams, Transition};
use crate::sim::Observation;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedPolicyConfig {
    /// Slot count of the node this agent drives.
    pub capacity: usize,
    pub hidden: Vec<usize>,
    pub hyper: PpoHyperparams,
    /// Two actions (skip / cache with a fixed victim rule) instead of one
    /// action per slot.
    pub binary_action: bool,
    pub seed: u64,
}

impl LearnedPolicyConfig {
    pub fn n_actions(&self) -> usize {
        if self.binary_action {
            2
        } else {
            self.capacity + 1
        }
    }

    pub fn input_size(&self) -> usize {
        Observation::len_for(self.capacity)
    }
}

#[derive(Debug, Clone)]
struct Pending {
    observation: Vec<f64>,
    action: usize,
    log_prob: f64,
    value: f64,
}

/// PPO-driven caching agent for one node. The reward it learns from is
/// chosen by its [`PolicyKind`].
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    kind: PolicyKind,
    reward: RewardKind,
    agent: PpoAgent,
    binary_action: bool,
    training: bool,
    pending: Option<Pending>,
}

impl LearnedPolicy {
    /// Panics if `kind` is not a learning policy.
    pub fn new(kind: PolicyKind, cfg: &LearnedPolicyConfig) -> Self {
        let reward = kind
            .reward_kind()
            .unwrap_or_else(|| panic!("{kind} is not a learning policy"));
        let agent = PpoAgent::new(
            cfg.input_size(),
            &cfg.hidden,
            cfg.n_actions(),
            cfg.hyper.clone(),
            cfg.seed,
        );
        LearnedPolicy {
            kind,
            reward,
            agent,
            binary_action: cfg.binary_action,
            training: true,
            pending: None,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn agent(&self) -> &PpoAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut PpoAgent {
        &mut self.agent
    }

    pub fn is_training(&self) -> bool {
        self.training
    }
}

impl CachePolicy for LearnedPolicy {
    fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<PolicyDecision> {
        let obs = ctx.observation.as_slice();
        let (action, log_prob, value) = self.agent.act(obs, self.training);
        if self.training {
            if let (Some(prev), Some(reward)) = (self.pending.take(), ctx.reward) {
                self.agent.record(Transition {
                    observation: prev.observation,
                    action: prev.action,
                    log_prob: prev.log_prob,
                    reward,
                    value: prev.value,
                    next_value: value,
                    done: false,
                })?;
            }
            self.pending = Some(Pending {
                observation: obs.to_vec(),
                action,
                log_prob,
                value,
            });
        }
        let slot_action = match (self.binary_action, action) {
            (false, a) => a,
            (true, 0) => 0,
            (true, _) => binary_victim(ctx.node, ctx.t),
        };
        Ok(PolicyDecision {
            action: slot_action,
            log_prob: Some(log_prob),
            value: Some(value),
        })
    }

    fn end_episode(&mut self) {
        self.pending = None;
        self.agent.discard_partial();
    }

    fn reward_kind(&self) -> Option<RewardKind> {
        Some(self.reward)
    }

    fn is_learning(&self) -> bool {
        true
    }

    /// Training samples actions and learns; evaluation takes the argmax
    /// action and leaves the parameters alone.
    fn set_training(&mut self, training: bool) {
        self.training = training;
        self.pending = None;
        self.agent.discard_partial();
    }

    fn network(&self) -> Option<&ActorCritic> {
        Some(self.agent.network())
    }

    fn set_network(&mut self, net: ActorCritic) -> Result<()> {
        let cur = self.agent.network();
        if net.actor.sizes() != cur.actor.sizes() || net.critic.sizes() != cur.critic.sizes() {
            return Err(Error::Checkpoint(format!(
                "network shape {:?} does not match this agent's {:?}",
                net.actor.sizes(),
                cur.actor.sizes()
            )));
        }
        self.agent.set_network(net);
        self.pending = None;
        Ok(())
    }
}
