//! Numerical oracle suite: each check compares production code against an
//! independent reference computation.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::runner::{run_cell, Cell};
use super::RunConfig;
use crate::error::Result;
use crate::metrics::runs_csv_string;
use crate::policies::{CachePolicy, DecisionContext, LfuPolicy, LruPolicy, PolicyKind};
use crate::rl::{
    discounted_returns, log_softmax, read_checkpoint, surrogate_objective, surrogate_with_grad,
    value_loss, value_loss_with_grad, write_checkpoint, ActorCritic, Mlp, PolicySample,
    ValueSample,
};
use crate::sim::{
    reward_expire, zipf_pmf, CacheNode, CachedFile, CatalogEntry, FileId, NodeRole,
    ObservationScale, TopologyMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Runs every oracle check. Errors are reserved for infrastructure
/// failures; mismatches show up as failed results.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    Ok(vec![
        check_zipf(cfg),
        check_reward_expire(cfg),
        check_ppo_gradients(&mut rng, 100),
        check_discounted_returns(&mut rng, 1000),
        check_policy_replay(&mut rng, PolicyKind::Lru, 50, 1000),
        check_policy_replay(&mut rng, PolicyKind::Lfu, 50, 1000),
        check_checkpoint_round_trip(&mut rng, 1000),
        check_determinism(cfg)?,
    ])
}

/// Compensated sum, independent of the pmf's own normalization order.
fn kahan_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn check_zipf(cfg: &RunConfig) -> CheckResult {
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut sizes = vec![1, 2, 10, cfg.n_devices, 1000];
    sizes.dedup();
    for &alpha in &cfg.alphas {
        for &n in &sizes {
            match zipf_pmf(alpha, n) {
                Ok(p) => worst = worst.max((kahan_sum(&p) - 1.0).abs()),
                Err(e) => return result("zipf_pmf sums to 1", false, e.to_string()),
            }
            cases += 1;
        }
    }
    result(
        "zipf_pmf sums to 1",
        worst <= 1e-12,
        format!("{cases} (alpha, F) cases, max |sum - 1| = {worst:.2e} (limit 1e-12)"),
    )
}

pub fn check_reward_expire(cfg: &RunConfig) -> CheckResult {
    let c1 = cfg.rewards.c1;
    let bad: Vec<u64> = (0..=100u64)
        .filter(|&h| {
            let expected = if h == 0 { -2.0 * c1 } else { 0.0 };
            reward_expire(h, c1) != expected
        })
        .collect();
    result(
        "reward_expire table",
        bad.is_empty(),
        format!(
            "hits 0..=100 with c1={c1}: {} mismatches {bad:?}",
            bad.len()
        ),
    )
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * normal(rng)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central differences of `f` around `params`.
fn numeric_grad(mlp: &Mlp, f: impl Fn(&Mlp) -> f64, h: f64) -> Vec<f64> {
    let mut probe = mlp.clone();
    (0..mlp.params().len())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = f(&probe);
            probe.params_mut()[i] = orig - h;
            let down = f(&probe);
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Analytic surrogate and value-loss gradients against central finite
/// differences on random two-slot networks with four transitions.
pub fn check_ppo_gradients<R: Rng + ?Sized>(rng: &mut R, reps: usize) -> CheckResult {
    const EPS: f64 = 0.2;
    const H: f64 = 1e-5;
    let input = 3 * 2 + 2;
    let n_actions = 3;
    let mut worst = 0.0f64;
    let mut resampled = 0usize;
    let mut done = 0usize;
    while done < reps {
        let old = Mlp::uniform(&[input, 6, 5, n_actions], rng);
        let mut actor = old.clone();
        for p in actor.params_mut() {
            *p += 0.3 * normal(rng);
        }
        let critic = Mlp::uniform(&[input, 6, 5, 1], rng);
        let obs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..input).map(|_| rng.random::<f64>()).collect())
            .collect();
        let actions: Vec<usize> = (0..4).map(|_| rng.random_range(0..n_actions)).collect();
        let advantages = gaussian_vec(rng, 4, 1.0);
        let targets = gaussian_vec(rng, 4, 2.0);
        let samples: Vec<PolicySample<'_>> = (0..4)
            .map(|i| PolicySample {
                observation: &obs[i],
                action: actions[i],
                old_log_prob: log_softmax(&old.forward(&obs[i]))[actions[i]],
                advantage: advantages[i],
            })
            .collect();
        // keep every ratio away from the clip kinks so the objective is
        // smooth inside the difference stencil
        let near_kink = samples.iter().any(|s| {
            let r = (log_softmax(&actor.forward(s.observation))[s.action] - s.old_log_prob).exp();
            (r - (1.0 + EPS)).abs() < 1e-3 || (r - (1.0 - EPS)).abs() < 1e-3
        });
        if near_kink {
            resampled += 1;
            continue;
        }
        let (_, analytic, _) = surrogate_with_grad(&actor, &samples, EPS);
        let numeric = numeric_grad(&actor, |m| surrogate_objective(m, &samples, EPS), H);
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(rel_err(*a, *n));
        }
        let vs: Vec<ValueSample<'_>> = (0..4)
            .map(|i| ValueSample {
                observation: &obs[i],
                target: targets[i],
            })
            .collect();
        let (_, analytic) = value_loss_with_grad(&critic, &vs);
        let numeric = numeric_grad(&critic, |m| value_loss(m, &vs), H);
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(rel_err(*a, *n));
        }
        done += 1;
    }
    result(
        "PPO gradients vs finite differences",
        worst < 1e-4,
        format!(
            "{reps} instances ({resampled} resampled near clip kinks), max relative error {worst:.2e} (limit 1e-4)"
        ),
    )
}

/// `G_n` summed term by term: rewards up to and including the first done
/// step, plus the discounted bootstrap if no done step intervenes.
fn brute_force_return(
    rewards: &[f64],
    dones: &[bool],
    gamma: f64,
    bootstrap: f64,
    n: usize,
) -> f64 {
    let mut g = 0.0;
    for k in n..rewards.len() {
        g += gamma.powi((k - n) as i32) * rewards[k];
        if dones[k] {
            return g;
        }
    }
    g + gamma.powi((rewards.len() - n) as i32) * bootstrap
}

pub fn check_discounted_returns<R: Rng + ?Sized>(rng: &mut R, reps: usize) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..reps {
        let len = rng.random_range(1..=64);
        let rewards = gaussian_vec(rng, len, 1.0);
        let dones: Vec<bool> = (0..len).map(|_| rng.random_bool(0.1)).collect();
        let gamma = rng.random_range(0.5..=1.0);
        let bootstrap: f64 = 5.0 * normal(rng);
        let fast = discounted_returns(&rewards, &dones, gamma, bootstrap);
        for (n, g) in fast.iter().enumerate() {
            worst =
                worst.max((g - brute_force_return(&rewards, &dones, gamma, bootstrap, n)).abs());
        }
    }
    result(
        "discounted returns vs brute force",
        worst < 1e-10,
        format!("{reps} random buffers, max abs error {worst:.2e} (limit 1e-10)"),
    )
}

/// Final slot contents after feeding `trace` to a policy through the same
/// hook sequence the simulator uses. Entries never expire.
pub fn replay_policy(
    policy: &mut dyn CachePolicy,
    trace: &[FileId],
    capacity: usize,
) -> Vec<Option<FileId>> {
    let n_files = trace.iter().copied().max().unwrap_or(1) as usize;
    let scale = ObservationScale {
        n_files,
        lifetime_hi: u32::MAX,
        hit_cap: 20,
    };
    let mut node = CacheNode::new(0, NodeRole::Leaf, capacity);
    for (i, &file_id) in trace.iter().enumerate() {
        let t = i as u64 + 1;
        policy.on_request(file_id, t);
        if let Some(idx) = node.find(file_id) {
            node.record_hit(idx);
            policy.on_hit(file_id, t);
            continue;
        }
        let entry = CatalogEntry {
            file_id,
            device_id: file_id - 1,
            lifetime: u32::MAX,
        };
        let observation = node.observe(&entry, t, &scale);
        let ctx = DecisionContext {
            t,
            node: &node,
            requested: &entry,
            observation: &observation,
            reward: None,
        };
        let action = policy
            .decide(&ctx)
            .expect("classical policies cannot fail")
            .action;
        if action > 0 {
            node.apply_cache_action(CachedFile::generated(&entry, t), action);
            policy.on_insert(action - 1, file_id, t);
        }
    }
    node.slots().iter().map(|s| s.map(|f| f.file_id)).collect()
}

/// Reference LRU: a recency list, most recent last.
pub fn lru_oracle(trace: &[FileId], capacity: usize) -> Vec<Option<FileId>> {
    let mut slots: Vec<Option<FileId>> = vec![None; capacity];
    let mut recency: Vec<FileId> = Vec::new();
    let touch = |recency: &mut Vec<FileId>, f: FileId| {
        recency.retain(|&x| x != f);
        recency.push(f);
    };
    for &f in trace {
        if slots.contains(&Some(f)) {
            touch(&mut recency, f);
            continue;
        }
        let slot = match slots.iter().position(Option::is_none) {
            Some(i) => i,
            None => {
                let victim = *recency
                    .iter()
                    .find(|x| slots.contains(&Some(**x)))
                    .expect("full cache has a resident in the recency list");
                slots
                    .iter()
                    .position(|s| *s == Some(victim))
                    .expect("resident")
            }
        };
        if let Some(old) = slots[slot] {
            recency.retain(|&x| x != old);
        }
        slots[slot] = Some(f);
        touch(&mut recency, f);
    }
    slots
}

/// Reference LFU: whole-run request counts, ties to the lowest slot.
pub fn lfu_oracle(trace: &[FileId], capacity: usize) -> Vec<Option<FileId>> {
    let mut slots: Vec<Option<FileId>> = vec![None; capacity];
    let mut counts: HashMap<FileId, u64> = HashMap::new();
    for &f in trace {
        *counts.entry(f).or_insert(0) += 1;
        if slots.contains(&Some(f)) {
            continue;
        }
        let slot = match slots.iter().position(Option::is_none) {
            Some(i) => i,
            None => {
                let mut ranked: Vec<(u64, usize)> = slots
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (counts[&s.expect("full")], i))
                    .collect();
                ranked.sort();
                ranked[0].1
            }
        };
        slots[slot] = Some(f);
    }
    slots
}

/// Skewed random trace over `n_files` files.
pub fn random_trace<R: Rng + ?Sized>(rng: &mut R, len: usize, n_files: u32) -> Vec<FileId> {
    let pmf = zipf_pmf(0.8, n_files as usize).expect("valid zipf parameters");
    let dist = rand::distr::weighted::WeightedIndex::new(&pmf).expect("valid weights");
    (0..len).map(|_| dist.sample(rng) as FileId + 1).collect()
}

pub fn check_policy_replay<R: Rng + ?Sized>(
    rng: &mut R,
    kind: PolicyKind,
    reps: usize,
    events: usize,
) -> CheckResult {
    let name = match kind {
        PolicyKind::Lru => "LRU replay vs oracle",
        _ => "LFU replay vs oracle",
    };
    let mut mismatches = 0;
    for _ in 0..reps {
        let capacity = rng.random_range(1..=6);
        let n_files = rng.random_range(2..=16);
        let trace = random_trace(rng, events, n_files);
        let (got, want) = match kind {
            PolicyKind::Lru => (
                replay_policy(&mut LruPolicy::new(), &trace, capacity),
                lru_oracle(&trace, capacity),
            ),
            _ => (
                replay_policy(&mut LfuPolicy::new(), &trace, capacity),
                lfu_oracle(&trace, capacity),
            ),
        };
        if got != want {
            mismatches += 1;
        }
    }
    result(
        name,
        mismatches == 0,
        format!("{reps} traces of {events} events, {mismatches} final-content mismatches"),
    )
}

pub fn check_checkpoint_round_trip<R: Rng + ?Sized>(rng: &mut R, n_obs: usize) -> CheckResult {
    let input = 3 * 10 + 2;
    let net = ActorCritic::new(input, &[64, 64], 11, rng);
    let mut bytes = Vec::new();
    if let Err(e) = write_checkpoint(&net, &mut bytes) {
        return result("checkpoint round trip", false, e.to_string());
    }
    let loaded = match read_checkpoint(&mut bytes.as_slice()) {
        Ok(n) => n,
        Err(e) => return result("checkpoint round trip", false, e.to_string()),
    };
    let differing = (0..n_obs)
        .filter(|_| {
            let obs: Vec<f64> = (0..input).map(|_| rng.random::<f64>()).collect();
            net.forward(&obs) != loaded.forward(&obs)
        })
        .count();
    result(
        "checkpoint round trip",
        differing == 0,
        format!("{n_obs} observations, {differing} differing outputs"),
    )
}

/// Two runs of the same reduced-budget cell must format to identical CSV.
pub fn check_determinism(cfg: &RunConfig) -> Result<CheckResult> {
    let small = RunConfig {
        train_steps: cfg.train_steps.min(1000),
        eval_steps: cfg.eval_steps.min(500),
        ..cfg.clone()
    };
    let cell = Cell {
        w: cfg.request_rates[0],
        alpha: cfg.alphas[0],
        policy: PolicyKind::PpoProposed,
        topology: TopologyMode::Hierarchical,
        replicate: cfg.replicates[0],
    };
    let a = run_cell(&small, &cell)?;
    let b = run_cell(&small, &cell)?;
    let (ra, rb) = match (a.record, b.record) {
        (Ok(ra), Ok(rb)) => (ra, rb),
        (Err(m), _) | (_, Err(m)) => {
            return Ok(result("determinism", false, format!("run failed: {m}")))
        }
    };
    let (sa, sb) = (runs_csv_string(&[ra]), runs_csv_string(&[rb]));
    Ok(result(
        "determinism",
        sa == sb,
        format!(
            "ppo-proposed cell at w={} alpha={} ({} train / {} eval steps) run twice: {}",
            cell.w,
            cell.alpha,
            small.train_steps,
            small.eval_steps,
            if sa == sb {
                "identical CSV rows"
            } else {
                "CSV rows differ"
            }
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_agree_on_hand_trace() {
        // capacity 2: 1,2 fill; 1 hit; 3 evicts LRU=2 / LFU=2
        let trace = [1, 2, 1, 3];
        assert_eq!(lru_oracle(&trace, 2), vec![Some(1), Some(3)]);
        assert_eq!(lfu_oracle(&trace, 2), vec![Some(1), Some(3)]);
        // 2 is requested twice, then 3 and 4 compete
        let trace = [1, 2, 2, 3, 4];
        assert_eq!(lru_oracle(&trace, 2), vec![Some(3), Some(4)]);
        assert_eq!(lfu_oracle(&trace, 2), vec![Some(4), Some(2)]);
    }

    #[test]
    fn brute_force_return_by_hand() {
        let g = brute_force_return(&[1.0, 2.0, 3.0], &[false, true, false], 0.5, 10.0, 0);
        assert_eq!(g, 1.0 + 0.5 * 2.0);
        let g = brute_force_return(&[1.0, 2.0, 3.0], &[false, true, false], 0.5, 10.0, 2);
        assert_eq!(g, 3.0 + 0.5 * 10.0);
    }

    #[test]
    fn fast_checks_pass() {
        let cfg = RunConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in [
            check_zipf(&cfg),
            check_reward_expire(&cfg),
            check_ppo_gradients(&mut rng, 100),
            check_discounted_returns(&mut rng, 200),
            check_policy_replay(&mut rng, PolicyKind::Lru, 10, 300),
            check_policy_replay(&mut rng, PolicyKind::Lfu, 10, 300),
            check_checkpoint_round_trip(&mut rng, 100),
        ] {
            assert!(r.passed, "{r}");
        }
    }
}
