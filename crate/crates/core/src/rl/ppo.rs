use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax, log_softmax, sample_action, ActorCritic, Mlp, Optimizer, OptimizerKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoHyperparams {
    pub learning_rate: f64,
    pub gamma: f64,
    /// Transitions collected between updates.
    pub n_steps: usize,
    pub n_minibatches: usize,
    pub clip_epsilon: f64,
    pub epochs: usize,
    /// Advantages are standardized per buffer when it holds at least this
    /// many transitions.
    pub normalize_advantages_min: usize,
    pub optimizer: OptimizerKind,
}

impl Default for PpoHyperparams {
    fn default() -> Self {
        PpoHyperparams {
            learning_rate: 0.001,
            gamma: 0.99,
            n_steps: 16,
            n_minibatches: 4,
            clip_epsilon: 0.2,
            epochs: 4,
            normalize_advantages_min: 8,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl PpoHyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if self.clip_epsilon.is_nan() || self.clip_epsilon <= 0.0 {
            return fail("clip_epsilon must be positive");
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return fail("learning_rate must be a non-negative number");
        }
        if self.n_steps == 0 || self.n_minibatches == 0 || self.epochs == 0 {
            return fail("n_steps, n_minibatches and epochs must be positive");
        }
        if !self.n_steps.is_multiple_of(self.n_minibatches) {
            return fail("n_steps must be divisible by n_minibatches");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: usize,
    /// Log-probability under the policy that acted.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub next_value: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    capacity: usize,
    items: Vec<Transition>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        RolloutBuffer {
            capacity,
            items: Vec::with_capacity(capacity),
        }
    }

    /// Returns `true` once the buffer is full.
    pub fn push(&mut self, t: Transition) -> bool {
        assert!(self.items.len() < self.capacity, "rollout buffer overflow");
        self.items.push(t);
        self.is_full()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.items
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

/// One-step TD advantage `r + gamma * V(s') * (1 - done) - V(s)`.
pub fn advantage(reward: f64, next_value: f64, value: f64, gamma: f64, done: bool) -> f64 {
    let bootstrap = if done { 0.0 } else { gamma * next_value };
    reward + bootstrap - value
}

/// `min(b * A, clip(b, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

/// Backward recursion `G_n = r_n + gamma * G_{n+1}`, seeded with
/// `bootstrap` after the last reward and reset to 0 after a done step.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64, bootstrap: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), dones.len());
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for i in (0..rewards.len()).rev() {
        if dones[i] {
            next = 0.0;
        }
        next = rewards[i] + gamma * next;
        out[i] = next;
    }
    out
}

/// Input to the clipped surrogate for one transition.
#[derive(Debug, Clone, Copy)]
pub struct PolicySample<'a> {
    pub observation: &'a [f64],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
}

/// Input to the value regression for one transition.
#[derive(Debug, Clone, Copy)]
pub struct ValueSample<'a> {
    pub observation: &'a [f64],
    pub target: f64,
}

/// Mean clipped surrogate of `actor` over `samples`.
pub fn surrogate_objective(actor: &Mlp, samples: &[PolicySample<'_>], eps: f64) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| {
            let logp = log_softmax(&actor.forward(s.observation))[s.action];
            clipped_surrogate((logp - s.old_log_prob).exp(), s.advantage, eps)
        })
        .sum();
    total / samples.len() as f64
}

/// Ratio bookkeeping from one surrogate evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RatioStats {
    pub ratio_sum: f64,
    pub max_ratio_deviation: f64,
    pub clipped: usize,
}

/// Mean clipped surrogate and its gradient with respect to the actor's
/// parameters (ascent direction).
pub fn surrogate_with_grad(
    actor: &Mlp,
    samples: &[PolicySample<'_>],
    eps: f64,
) -> (f64, Vec<f64>, RatioStats) {
    let n = samples.len() as f64;
    let mut grad = vec![0.0; actor.params().len()];
    let mut objective = 0.0;
    let mut stats = RatioStats::default();
    for s in samples {
        let cache = actor.forward_cached(s.observation);
        let logp = log_softmax(cache.output());
        let ratio = (logp[s.action] - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
        let unclipped_term = ratio * s.advantage;
        let clipped_term = clipped * s.advantage;
        objective += unclipped_term.min(clipped_term);

        stats.ratio_sum += ratio;
        stats.max_ratio_deviation = stats.max_ratio_deviation.max((ratio - 1.0).abs());
        if (ratio - 1.0).abs() > eps {
            stats.clipped += 1;
        }

        // The min selects the clipped constant only when the ratio is
        // outside the trust region; then no gradient flows.
        if unclipped_term <= clipped_term {
            // d ratio / d logits = ratio * (onehot(a) - softmax)
            let coeff = s.advantage * ratio / n;
            let grad_logits: Vec<f64> = logp
                .iter()
                .enumerate()
                .map(|(i, lp)| {
                    let onehot = if i == s.action { 1.0 } else { 0.0 };
                    coeff * (onehot - lp.exp())
                })
                .collect();
            actor.backward(&cache, &grad_logits, &mut grad);
        }
    }
    (objective / n, grad, stats)
}

/// Mean squared error between critic predictions and return targets.
pub fn value_loss(critic: &Mlp, samples: &[ValueSample<'_>]) -> f64 {
    samples
        .iter()
        .map(|s| (critic.forward(s.observation)[0] - s.target).powi(2))
        .sum::<f64>()
        / samples.len() as f64
}

pub fn value_loss_with_grad(critic: &Mlp, samples: &[ValueSample<'_>]) -> (f64, Vec<f64>) {
    let n = samples.len() as f64;
    let mut grad = vec![0.0; critic.params().len()];
    let mut loss = 0.0;
    for s in samples {
        let cache = critic.forward_cached(s.observation);
        let err = cache.output()[0] - s.target;
        loss += err * err;
        critic.backward(&cache, &[2.0 * err / n], &mut grad);
    }
    (loss / n, grad)
}

/// Diagnostics of one [`ppo_update`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    /// Mean surrogate over all minibatch evaluations.
    pub surrogate: f64,
    /// Mean value loss over all minibatch evaluations.
    pub value_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` in the first minibatch, evaluated before any
    /// parameter moved. Zero unless log-prob bookkeeping is broken.
    pub initial_ratio_deviation: f64,
}

/// Standardizes `xs` in place (zero mean, unit variance).
fn standardize(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for x in xs.iter_mut() {
        *x = (*x - mean) / (std + 1e-8);
    }
}

/// Clipped-surrogate ascent on the actor and value regression on the
/// critic over `epochs` passes of shuffled minibatches. Ratios use the
/// log-probabilities stored at collection time. Clears the buffer.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut ActorCritic,
    actor_opt: &mut Optimizer,
    critic_opt: &mut Optimizer,
    buffer: &mut RolloutBuffer,
    hyper: &PpoHyperparams,
    rng: &mut R,
) -> Result<UpdateStats> {
    let items = buffer.transitions();
    let n = items.len();
    if n == 0 {
        return Err(Error::Divergence(
            "update called with an empty buffer".into(),
        ));
    }
    let rewards: Vec<f64> = items.iter().map(|t| t.reward).collect();
    let dones: Vec<bool> = items.iter().map(|t| t.done).collect();
    let last = &items[n - 1];
    let bootstrap = if last.done { 0.0 } else { last.next_value };
    let returns = discounted_returns(&rewards, &dones, hyper.gamma, bootstrap);
    let mut advantages: Vec<f64> = items
        .iter()
        .map(|t| advantage(t.reward, t.next_value, t.value, hyper.gamma, t.done))
        .collect();
    if n >= hyper.normalize_advantages_min && n > 1 {
        standardize(&mut advantages);
    }
    if advantages.iter().chain(&returns).any(|x| !x.is_finite()) {
        return Err(Error::Divergence(format!(
            "non-finite advantages or returns: rewards={rewards:?}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let batch = (n / hyper.n_minibatches).max(1);
    let mut stats = UpdateStats::default();
    let mut evaluations = 0usize;
    let mut ratio_count = 0usize;
    let mut clipped = 0usize;
    let mut ratio_sum = 0.0;

    for epoch in 0..hyper.epochs {
        order.shuffle(rng);
        for (mb, chunk) in order.chunks(batch).enumerate() {
            let policy: Vec<PolicySample<'_>> = chunk
                .iter()
                .map(|&i| PolicySample {
                    observation: &items[i].observation,
                    action: items[i].action,
                    old_log_prob: items[i].log_prob,
                    advantage: advantages[i],
                })
                .collect();
            let (objective, mut grad, ratios) =
                surrogate_with_grad(&net.actor, &policy, hyper.clip_epsilon);
            if epoch == 0 && mb == 0 {
                stats.initial_ratio_deviation = ratios.max_ratio_deviation;
            }
            // ascend the surrogate
            grad.iter_mut().for_each(|g| *g = -*g);

            let targets: Vec<ValueSample<'_>> = chunk
                .iter()
                .map(|&i| ValueSample {
                    observation: &items[i].observation,
                    target: returns[i],
                })
                .collect();
            let (vloss, vgrad) = value_loss_with_grad(&net.critic, &targets);

            if !objective.is_finite()
                || !vloss.is_finite()
                || grad.iter().chain(&vgrad).any(|g| !g.is_finite())
            {
                return Err(Error::Divergence(format!(
                    "non-finite gradient (epoch {epoch}, minibatch {mb}, surrogate {objective}, \
                     value loss {vloss}, max |advantage| {:.3e})",
                    advantages.iter().fold(0.0f64, |m, a| m.max(a.abs()))
                )));
            }
            actor_opt.step(net.actor.params_mut(), &grad);
            critic_opt.step(net.critic.params_mut(), &vgrad);

            stats.surrogate += objective;
            stats.value_loss += vloss;
            evaluations += 1;
            ratio_sum += ratios.ratio_sum;
            clipped += ratios.clipped;
            ratio_count += chunk.len();
        }
    }
    if !net.is_finite() {
        return Err(Error::Divergence("parameters became non-finite".into()));
    }
    stats.surrogate /= evaluations as f64;
    stats.value_loss /= evaluations as f64;
    stats.mean_ratio = ratio_sum / ratio_count as f64;
    stats.clip_fraction = clipped as f64 / ratio_count as f64;
    buffer.clear();
    Ok(stats)
}

/// An actor-critic learner with its own rollout buffer, optimizers and
/// random stream.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    net: ActorCritic,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    hyper: PpoHyperparams,
    buffer: RolloutBuffer,
    rng: ChaCha8Rng,
    updates: u64,
    last_stats: Option<UpdateStats>,
}

impl PpoAgent {
    pub fn new(
        input: usize,
        hidden: &[usize],
        n_actions: usize,
        hyper: PpoHyperparams,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = ActorCritic::new(input, hidden, n_actions, &mut rng);
        Self::with_network(net, hyper, rng)
    }

    pub fn with_network(net: ActorCritic, hyper: PpoHyperparams, rng: ChaCha8Rng) -> Self {
        let actor_opt = Optimizer::new(
            hyper.optimizer,
            hyper.learning_rate,
            net.actor.params().len(),
        );
        let critic_opt = Optimizer::new(
            hyper.optimizer,
            hyper.learning_rate,
            net.critic.params().len(),
        );
        PpoAgent {
            buffer: RolloutBuffer::new(hyper.n_steps),
            net,
            actor_opt,
            critic_opt,
            hyper,
            rng,
            updates: 0,
            last_stats: None,
        }
    }

    pub fn network(&self) -> &ActorCritic {
        &self.net
    }

    /// Replaces the networks, e.g. from a checkpoint. Optimizer state resets.
    pub fn set_network(&mut self, net: ActorCritic) {
        self.actor_opt = Optimizer::new(
            self.hyper.optimizer,
            self.hyper.learning_rate,
            net.actor.params().len(),
        );
        self.critic_opt = Optimizer::new(
            self.hyper.optimizer,
            self.hyper.learning_rate,
            net.critic.params().len(),
        );
        self.net = net;
    }

    pub fn hyperparams(&self) -> &PpoHyperparams {
        &self.hyper
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_stats(&self) -> Option<UpdateStats> {
        self.last_stats
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Samples (`explore`) or takes the argmax action. Returns the action,
    /// its log-probability and the critic's value estimate.
    pub fn act(&mut self, observation: &[f64], explore: bool) -> (usize, f64, f64) {
        let (logits, value) = self.net.forward(observation);
        if explore {
            let (a, lp) = sample_action(&logits, &mut self.rng);
            (a, lp, value)
        } else {
            let a = argmax(&logits);
            (a, log_softmax(&logits)[a], value)
        }
    }

    /// Buffers a transition and runs an update once `n_steps` are stored.
    pub fn record(&mut self, transition: Transition) -> Result<Option<UpdateStats>> {
        if !self.buffer.push(transition) {
            return Ok(None);
        }
        let stats = ppo_update(
            &mut self.net,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &mut self.buffer,
            &self.hyper,
            &mut self.rng,
        )?;
        self.updates += 1;
        self.last_stats = Some(stats);
        Ok(Some(stats))
    }

    /// Drops transitions that never filled a buffer.
    pub fn discard_partial(&mut self) {
        self.buffer.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantage_examples() {
        assert!((advantage(1.0, 2.0, 1.0, 0.99, false) - 1.98).abs() < 1e-12);
        assert_eq!(advantage(0.0, 5.0, 0.0, 0.99, true), 0.0);
        assert_eq!(advantage(0.0, 3.0, 2.0, 1.0, false), 1.0);
    }

    #[test]
    fn surrogate_examples() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        // negative advantage below the trust region: the clipped term is smaller
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
        assert!((clipped_surrogate(1.5, -1.0, 0.2) + 1.5).abs() < 1e-15);
        for a in [-3.0, -0.1, 0.0, 2.5] {
            for eps in [0.05, 0.2, 0.5] {
                assert_eq!(clipped_surrogate(1.0, a, eps), a);
            }
        }
    }

    #[test]
    fn returns_examples() {
        assert_eq!(
            discounted_returns(&[1.0, 1.0, 1.0], &[false; 3], 1.0, 0.0),
            vec![3.0, 2.0, 1.0]
        );
        assert_eq!(discounted_returns(&[1.0], &[false], 0.5, 4.0), vec![3.0]);
        // done cuts the bootstrap and the chain
        assert_eq!(
            discounted_returns(&[1.0, 2.0], &[true, false], 0.5, 4.0),
            vec![1.0, 4.0]
        );
    }

    #[test]
    fn buffer_fills_and_clears() {
        let mut buf = RolloutBuffer::new(2);
        let t = Transition {
            observation: vec![0.0],
            action: 0,
            log_prob: -0.5,
            reward: 0.0,
            value: 0.0,
            next_value: 0.0,
            done: false,
        };
        assert!(!buf.push(t.clone()));
        assert!(buf.push(t));
        buf.clear();
        assert!(buf.is_empty());
    }

    #[test]
    fn hyperparams_validation() {
        assert!(PpoHyperparams::default().validate().is_ok());
        let bad = PpoHyperparams {
            n_minibatches: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PpoHyperparams {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
