use iotcache::rl::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_obs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn random_buffer<R: Rng>(
    net: &ActorCritic,
    rng: &mut R,
    n: usize,
    zero_adv: bool,
) -> RolloutBuffer {
    let mut buf = RolloutBuffer::new(n);
    let input = net.input_size();
    for _ in 0..n {
        let obs = random_obs(rng, input);
        let (logits, value) = net.forward(&obs);
        let (action, log_prob) = sample_action(&logits, rng);
        let (reward, next_value) = if zero_adv {
            // r + gamma * v' - v = 0 with gamma = 1
            (0.0, value)
        } else {
            let penalty = if rng.random_bool(0.3) { -2.0 } else { 0.0 };
            (rng.random::<f64>() + penalty, rng.random::<f64>() * 10.0)
        };
        buf.push(Transition {
            observation: obs,
            action,
            log_prob,
            reward,
            value,
            next_value,
            done: false,
        });
    }
    buf
}

#[test]
#[allow(clippy::excessive_precision)]
fn golden_forward_pass() {
    // parameters sin(i + 1) / 2, inputs cos(k) / 2; reference values from a
    // 50-digit evaluation
    let sizes = [8, 6, 5, 3];
    let n = Mlp::param_count(&sizes);
    assert_eq!(n, 107);
    let params: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin() / 2.0).collect();
    let net = Mlp::from_params(&sizes, params).unwrap();
    let x: Vec<f64> = (0..8).map(|k| (k as f64).cos() / 2.0).collect();
    let y = net.forward(&x);
    let want = [
        -0.625552456216477522,
        -0.90162346669837083655,
        -0.072574448612982836544,
    ];
    for (a, b) in y.iter().zip(want) {
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
}

#[test]
fn random_networks_give_finite_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let sizes = [32, 64, 64, 11];
        let params: Vec<f64> = (0..Mlp::param_count(&sizes))
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let net = Mlp::from_params(&sizes, params).unwrap();
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..=1.0)).collect();
        assert!(net.forward(&x).iter().all(|v| v.is_finite()));
    }
}

#[test]
fn argmax_evaluation_example() {
    assert_eq!(argmax(&[0.1, 2.0, -1.0]), 1);
}

#[test]
fn zero_advantages_leave_actor_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = ActorCritic::new(8, &[16, 16], 3, &mut rng);
    let hyper = PpoHyperparams {
        gamma: 1.0,
        normalize_advantages_min: usize::MAX,
        ..Default::default()
    };
    let actor_before = net.actor.clone();
    let critic_before = net.critic.clone();
    let mut buf = random_buffer(&net, &mut rng, 16, true);
    let mut aopt = Optimizer::new(
        hyper.optimizer,
        hyper.learning_rate,
        net.actor.params().len(),
    );
    let mut copt = Optimizer::new(
        hyper.optimizer,
        hyper.learning_rate,
        net.critic.params().len(),
    );
    ppo_update(&mut net, &mut aopt, &mut copt, &mut buf, &hyper, &mut rng).unwrap();
    let drift = net
        .actor
        .params()
        .iter()
        .zip(actor_before.params())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift < 1e-15, "actor moved by {drift}");
    assert_ne!(
        net.critic, critic_before,
        "critic still regresses on returns"
    );
    assert!(buf.is_empty());
}

#[test]
fn first_minibatch_ratios_are_exactly_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = ActorCritic::new(8, &[16, 16], 3, &mut rng);
    let hyper = PpoHyperparams::default();
    let mut aopt = Optimizer::new(
        hyper.optimizer,
        hyper.learning_rate,
        net.actor.params().len(),
    );
    let mut copt = Optimizer::new(
        hyper.optimizer,
        hyper.learning_rate,
        net.critic.params().len(),
    );
    for _ in 0..20 {
        let mut buf = random_buffer(&net, &mut rng, 16, false);
        let stats = ppo_update(&mut net, &mut aopt, &mut copt, &mut buf, &hyper, &mut rng).unwrap();
        assert_eq!(stats.initial_ratio_deviation, 0.0);
        assert!((0.0..=1.0).contains(&stats.clip_fraction));
    }
}

#[test]
fn value_loss_decreases_on_fixed_buffer() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut critic = Mlp::uniform(&[8, 64, 64, 1], &mut rng);
    let obs: Vec<Vec<f64>> = (0..16).map(|_| random_obs(&mut rng, 8)).collect();
    let targets: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
    let samples: Vec<ValueSample<'_>> = obs
        .iter()
        .zip(&targets)
        .map(|(o, &t)| ValueSample {
            observation: o,
            target: t,
        })
        .collect();
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.001, critic.params().len());
    let mut prev = f64::INFINITY;
    for step in 0..50 {
        let (loss, grad) = value_loss_with_grad(&critic, &samples);
        assert!(loss <= prev, "step {step}: {loss} > {prev}");
        prev = loss;
        opt.step(critic.params_mut(), &grad);
    }
    assert!(value_loss(&critic, &samples) < prev);
}

#[test]
fn huge_clip_range_gives_unclipped_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let old = Mlp::uniform(&[6, 8, 4], &mut rng);
    let mut actor = old.clone();
    for p in actor.params_mut() {
        *p += rng.random_range(-0.5..0.5);
    }
    let obs: Vec<Vec<f64>> = (0..12).map(|_| random_obs(&mut rng, 6)).collect();
    let samples: Vec<PolicySample<'_>> = obs
        .iter()
        .map(|o| {
            let a = rng.random_range(0..4);
            PolicySample {
                observation: o,
                action: a,
                old_log_prob: log_softmax(&old.forward(o))[a],
                advantage: rng.random_range(-2.0..2.0),
            }
        })
        .collect();
    let unclipped: f64 = samples
        .iter()
        .map(|s| {
            (log_softmax(&actor.forward(s.observation))[s.action] - s.old_log_prob).exp()
                * s.advantage
        })
        .sum::<f64>()
        / samples.len() as f64;
    let (obj, _, _) = surrogate_with_grad(&actor, &samples, 1e12);
    assert!((obj - unclipped).abs() < 1e-12);
    assert!((surrogate_objective(&actor, &samples, 1e12) - unclipped).abs() < 1e-12);
    // with the default range some samples clip, lowering the objective
    assert!(surrogate_objective(&actor, &samples, 0.2) <= unclipped + 1e-12);
}

#[test]
fn zero_learning_rate_freezes_the_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let hyper = PpoHyperparams {
            learning_rate: 0.0,
            optimizer,
            ..Default::default()
        };
        let mut agent = PpoAgent::new(8, &[16, 16], 3, hyper, 7);
        let probe: Vec<Vec<f64>> = (0..50).map(|_| random_obs(&mut rng, 8)).collect();
        let before: Vec<Vec<f64>> = probe
            .iter()
            .map(|o| softmax(&agent.network().forward(o).0))
            .collect();
        for _ in 0..64 {
            let obs = random_obs(&mut rng, 8);
            let (action, log_prob, value) = agent.act(&obs, true);
            agent
                .record(Transition {
                    observation: obs,
                    action,
                    log_prob,
                    reward: rng.random_range(-2.0..1.0),
                    value,
                    next_value: value,
                    done: false,
                })
                .unwrap();
        }
        assert_eq!(agent.updates(), 4);
        let after: Vec<Vec<f64>> = probe
            .iter()
            .map(|o| softmax(&agent.network().forward(o).0))
            .collect();
        assert_eq!(before, after);
    }
}

#[test]
fn ascent_step_raises_surrogate_for_both_optimizers() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let actor = Mlp::uniform(&[6, 8, 3], &mut rng);
        let obs: Vec<Vec<f64>> = (0..8).map(|_| random_obs(&mut rng, 6)).collect();
        let samples: Vec<PolicySample<'_>> = obs
            .iter()
            .map(|o| {
                let a = rng.random_range(0..3);
                PolicySample {
                    observation: o,
                    action: a,
                    old_log_prob: log_softmax(&actor.forward(o))[a],
                    advantage: rng.random_range(-1.0..1.0),
                }
            })
            .collect();
        let (before, grad, _) = surrogate_with_grad(&actor, &samples, 0.2);
        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut moved = actor.clone();
        Optimizer::new(optimizer, 1e-4, moved.params().len()).step(moved.params_mut(), &descent);
        assert!(
            surrogate_objective(&moved, &samples, 0.2) > before,
            "{optimizer}"
        );
    }
}

#[test]
fn sampling_is_reproducible_under_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let obs: Vec<Vec<f64>> = (0..200).map(|_| random_obs(&mut rng, 8)).collect();
    let run = || {
        let mut agent = PpoAgent::new(8, &[16], 4, PpoHyperparams::default(), 99);
        obs.iter().map(|o| agent.act(o, true).0).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
    let mut agent = PpoAgent::new(8, &[16], 4, PpoHyperparams::default(), 99);
    assert!(obs.iter().all(|o| agent.act(o, false).0 < 4));
}

fn long_run(optimizer: OptimizerKind, updates: u64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = PpoHyperparams {
        optimizer,
        ..Default::default()
    };
    let mut agent = PpoAgent::new(32, &[64, 64], 11, hyper, seed);
    while agent.updates() < updates {
        let obs = random_obs(&mut rng, 32);
        let (action, log_prob, value) = agent.act(&obs, true);
        let penalties = rng.random_range(0..3) as f64 * -2.0;
        let reward = rng.random::<f64>() + if rng.random_bool(0.2) { penalties } else { 0.0 };
        agent
            .record(Transition {
                observation: obs,
                action,
                log_prob,
                reward,
                value,
                next_value: agent.network().value(&random_obs(&mut rng, 32)),
                done: rng.random_bool(0.01),
            })
            .unwrap();
    }
    assert!(agent.network().is_finite());
}

#[test]
fn parameters_stay_finite_over_ten_thousand_updates() {
    long_run(OptimizerKind::Sgd, 10_000, 10);
    long_run(OptimizerKind::Adam, 10_000, 11);
}

#[test]
fn checkpoint_round_trip_reproduces_decisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = ActorCritic::new(32, &[64, 64], 11, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.bin");
    save_checkpoint(&net, &path).unwrap();
    let loaded = load_checkpoint(&path, 32, 11).unwrap();
    assert_eq!(loaded, net);
    for _ in 0..1000 {
        let obs = random_obs(&mut rng, 32);
        let (la, va) = net.forward(&obs);
        let (lb, vb) = loaded.forward(&obs);
        assert_eq!(argmax(&la), argmax(&lb));
        assert_eq!((la, va), (lb, vb));
    }
    // M=10 checkpoint into an M=12 configuration
    let err = load_checkpoint(&path, 3 * 12 + 2, 13).unwrap_err();
    assert!(
        err.to_string().contains("configuration needs 38 and 13"),
        "{err}"
    );
    let err = load_checkpoint(&dir.path().join("missing.bin"), 32, 11).unwrap_err();
    assert!(err.to_string().contains("missing.bin"), "{err}");
}
