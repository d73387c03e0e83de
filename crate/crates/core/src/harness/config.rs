use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::policies::PolicyKind;
use crate::rl::{OptimizerKind, PpoHyperparams};
use crate::sim::{RewardConstants, TopologyMode};

/// Everything a grid run depends on. Outputs are a pure function of this
/// value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_devices: usize,
    pub n_leaves: usize,
    pub leaf_capacity: usize,
    pub parent_capacity: usize,
    pub lifetime_min: u32,
    pub lifetime_max: u32,
    pub request_rates: Vec<f64>,
    pub alphas: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub topologies: Vec<TopologyMode>,
    pub train_steps: u64,
    pub eval_steps: u64,
    /// Replicate indices; each yields an independent environment.
    pub replicates: Vec<usize>,
    pub master_seed: u64,
    pub rewards: RewardConstants,
    pub hit_cap: u32,
    pub hidden: Vec<usize>,
    pub ppo: PpoHyperparams,
    pub binary_action: bool,
    pub decide_on_parent_hit: bool,
    /// Grid cells run concurrently.
    pub parallel: usize,
    pub out_dir: PathBuf,
    pub save_checkpoints: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_devices: 100,
            n_leaves: 2,
            leaf_capacity: 10,
            parent_capacity: 10,
            lifetime_min: 2,
            lifetime_max: 14,
            request_rates: vec![0.5, 1.0, 1.5, 2.0],
            alphas: vec![0.7, 0.8, 0.9, 1.0, 1.1, 1.2],
            policies: PolicyKind::ALL.to_vec(),
            topologies: vec![TopologyMode::Hierarchical],
            train_steps: 20_000,
            eval_steps: 5_000,
            replicates: (0..5).collect(),
            master_seed: 20_240_601,
            rewards: RewardConstants::default(),
            hit_cap: 20,
            hidden: vec![64, 64],
            ppo: PpoHyperparams::default(),
            binary_action: false,
            decide_on_parent_hit: false,
            parallel: 1,
            out_dir: PathBuf::from("results"),
            save_checkpoints: true,
        }
    }
}

/// Keys accepted in config files and `--set` overrides.
pub const CONFIG_KEYS: [&str; 33] = [
    "n_devices",
    "n_leaves",
    "leaf_capacity",
    "parent_capacity",
    "lifetime_min",
    "lifetime_max",
    "w",
    "alpha",
    "policy",
    "topology",
    "train_steps",
    "eval_steps",
    "seeds",
    "replicates",
    "master_seed",
    "c1",
    "c2",
    "c3",
    "hit_cap",
    "hidden",
    "learning_rate",
    "gamma",
    "n_steps",
    "n_minibatches",
    "clip_epsilon",
    "epochs",
    "normalize_advantages_min",
    "optimizer",
    "binary_action",
    "decide_on_parent_hit",
    "parallel",
    "out_dir",
    "checkpoints",
];

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        v => Err(Error::config(format!(
            "{key}: expected true or false, got `{v}`"
        ))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "n_devices" => self.n_devices = parse_one(key, v)?,
            "n_leaves" => self.n_leaves = parse_one(key, v)?,
            "leaf_capacity" => self.leaf_capacity = parse_one(key, v)?,
            "parent_capacity" => self.parent_capacity = parse_one(key, v)?,
            "lifetime_min" => self.lifetime_min = parse_one(key, v)?,
            "lifetime_max" => self.lifetime_max = parse_one(key, v)?,
            "w" => self.request_rates = parse_list(key, v)?,
            "alpha" => self.alphas = parse_list(key, v)?,
            "policy" => {
                self.policies = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PolicyKind::from_str)
                    .collect::<Result<_>>()?
            }
            "topology" => {
                self.topologies = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(TopologyMode::from_str)
                    .collect::<Result<_>>()?
            }
            "train_steps" => self.train_steps = parse_one(key, v)?,
            "eval_steps" => self.eval_steps = parse_one(key, v)?,
            "seeds" => {
                let n: usize = parse_one(key, v)?;
                self.replicates = (0..n).collect();
            }
            "replicates" => self.replicates = parse_list(key, v)?,
            "master_seed" => self.master_seed = parse_one(key, v)?,
            "c1" => self.rewards.c1 = parse_one(key, v)?,
            "c2" => self.rewards.c2 = parse_one(key, v)?,
            "c3" => self.rewards.c3 = parse_one(key, v)?,
            "hit_cap" => self.hit_cap = parse_one(key, v)?,
            "hidden" => self.hidden = parse_list(key, v)?,
            "learning_rate" => self.ppo.learning_rate = parse_one(key, v)?,
            "gamma" => self.ppo.gamma = parse_one(key, v)?,
            "n_steps" => self.ppo.n_steps = parse_one(key, v)?,
            "n_minibatches" => self.ppo.n_minibatches = parse_one(key, v)?,
            "clip_epsilon" => self.ppo.clip_epsilon = parse_one(key, v)?,
            "epochs" => self.ppo.epochs = parse_one(key, v)?,
            "normalize_advantages_min" => self.ppo.normalize_advantages_min = parse_one(key, v)?,
            "optimizer" => self.ppo.optimizer = v.parse::<OptimizerKind>()?,
            "binary_action" => self.binary_action = parse_bool(key, v)?,
            "decide_on_parent_hit" => self.decide_on_parent_hit = parse_bool(key, v)?,
            "parallel" => self.parallel = parse_one(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "checkpoints" => self.save_checkpoints = parse_bool(key, v)?,
            _ => {
                return Err(Error::config(format!(
                    "unknown key `{key}` (valid: {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` text: one setting per line, `#` starts a
    /// comment, lists are comma separated.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    n + 1
                ))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    /// Checks ranges and cross-field rules.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_devices == 0 {
            return fail("n_devices must be at least 1".into());
        }
        if self.n_leaves == 0 {
            return fail("n_leaves must be at least 1".into());
        }
        if self.leaf_capacity == 0 || self.parent_capacity == 0 {
            return fail("capacities must be at least 1".into());
        }
        if self.lifetime_min == 0 || self.lifetime_min > self.lifetime_max {
            return fail(format!(
                "lifetime bounds must satisfy 1 <= min <= max, got {}..{}",
                self.lifetime_min, self.lifetime_max
            ));
        }
        for (name, empty) in [
            ("w", self.request_rates.is_empty()),
            ("alpha", self.alphas.is_empty()),
            ("policy", self.policies.is_empty()),
            ("topology", self.topologies.is_empty()),
            ("replicates", self.replicates.is_empty()),
            ("hidden", self.hidden.is_empty()),
        ] {
            if empty {
                return fail(format!("{name} list must not be empty"));
            }
        }
        if let Some(w) = self
            .request_rates
            .iter()
            .find(|w| !(w.is_finite() && **w > 0.0))
        {
            return fail(format!("request rate w must be positive, got {w}"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return fail(format!("alpha must be positive, got {a}"));
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if self.eval_steps == 0 {
            return fail("eval_steps must be at least 1".into());
        }
        if self.hit_cap == 0 {
            return fail("hit_cap must be at least 1".into());
        }
        if self.parallel == 0 {
            return fail("parallel must be at least 1".into());
        }
        for (name, c) in [
            ("c1", self.rewards.c1),
            ("c2", self.rewards.c2),
            ("c3", self.rewards.c3),
        ] {
            if !(c.is_finite() && c >= 0.0) {
                return fail(format!("{name} must be a non-negative number, got {c}"));
            }
        }
        if self.topologies.contains(&TopologyMode::Flat) {
            self.flat_leaf_capacity()?;
        }
        self.ppo.validate()
    }

    pub fn hierarchical_total(&self) -> usize {
        self.n_leaves * self.leaf_capacity + self.parent_capacity
    }

    /// Per-leaf capacity in flat mode: the hierarchical total spread evenly
    /// over the leaves.
    pub fn flat_leaf_capacity(&self) -> Result<usize> {
        let total = self.hierarchical_total();
        if !total.is_multiple_of(self.n_leaves) {
            return Err(Error::config(format!(
                "flat mode needs the total capacity {total} to split evenly over {} leaves",
                self.n_leaves
            )));
        }
        Ok(total / self.n_leaves)
    }

    /// `(leaf capacity, parent capacity)` for a topology.
    pub fn capacities(&self, mode: TopologyMode) -> Result<(usize, usize)> {
        match mode {
            TopologyMode::Hierarchical => Ok((self.leaf_capacity, self.parent_capacity)),
            TopologyMode::Flat => Ok((self.flat_leaf_capacity()?, 0)),
        }
    }

    /// Canonical `key = value` form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let pairs: Vec<(&str, String)> = vec![
            ("n_devices", self.n_devices.to_string()),
            ("n_leaves", self.n_leaves.to_string()),
            ("leaf_capacity", self.leaf_capacity.to_string()),
            ("parent_capacity", self.parent_capacity.to_string()),
            ("lifetime_min", self.lifetime_min.to_string()),
            ("lifetime_max", self.lifetime_max.to_string()),
            ("w", join(&self.request_rates)),
            ("alpha", join(&self.alphas)),
            ("policy", join(&self.policies)),
            ("topology", join(&self.topologies)),
            ("train_steps", self.train_steps.to_string()),
            ("eval_steps", self.eval_steps.to_string()),
            ("replicates", join(&self.replicates)),
            ("master_seed", self.master_seed.to_string()),
            ("c1", self.rewards.c1.to_string()),
            ("c2", self.rewards.c2.to_string()),
            ("c3", self.rewards.c3.to_string()),
            ("hit_cap", self.hit_cap.to_string()),
            ("hidden", join(&self.hidden)),
            ("learning_rate", self.ppo.learning_rate.to_string()),
            ("gamma", self.ppo.gamma.to_string()),
            ("n_steps", self.ppo.n_steps.to_string()),
            ("n_minibatches", self.ppo.n_minibatches.to_string()),
            ("clip_epsilon", self.ppo.clip_epsilon.to_string()),
            ("epochs", self.ppo.epochs.to_string()),
            (
                "normalize_advantages_min",
                self.ppo.normalize_advantages_min.to_string(),
            ),
            ("optimizer", self.ppo.optimizer.to_string()),
            ("binary_action", self.binary_action.to_string()),
            (
                "decide_on_parent_hit",
                self.decide_on_parent_hit.to_string(),
            ),
            ("parallel", self.parallel.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("checkpoints", self.save_checkpoints.to_string()),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Builds a config from defaults, an optional file, then `overrides` in
/// order, and validates the result.
pub fn parse_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        cfg.apply_text(&text)
            .map_err(|e| Error::config(format!("{}: {}", p.display(), strip_prefix(&e))))?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.n_devices, 100);
        assert_eq!(cfg.n_leaves, 2);
        assert_eq!((cfg.leaf_capacity, cfg.parent_capacity), (10, 10));
        assert_eq!((cfg.lifetime_min, cfg.lifetime_max), (2, 14));
        assert_eq!(cfg.request_rates.len() * cfg.alphas.len(), 24);
        assert_eq!(cfg.replicates.len(), 5);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.conf");
        std::fs::write(&p, "# nothing\n\n").unwrap();
        assert_eq!(parse_config(Some(&p), &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn alpha_override_makes_single_setting_grid() {
        let cfg = parse_config(None, &[("alpha".into(), "1.5".into())]).unwrap();
        assert_eq!(cfg.alphas, vec![1.5]);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        std::fs::write(&p, "w = 1.0, 2.0  # two rates\nseeds=3\n").unwrap();
        let cfg = parse_config(Some(&p), &[("w".into(), "0.5".into())]).unwrap();
        assert_eq!(cfg.request_rates, vec![0.5]);
        assert_eq!(cfg.replicates, vec![0, 1, 2]);
    }

    #[test]
    fn unknown_policy_names_valid_options() {
        let err = parse_config(None, &[("policy".into(), "unknown".into())]).unwrap_err();
        let msg = err.to_string();
        for p in ["lru", "lfu", "drl-freshness", "ppo-proposed"] {
            assert!(msg.contains(p), "{msg}");
        }
    }

    #[test]
    fn rejects_unknown_keys_and_malformed_lines() {
        let mut cfg = RunConfig::default();
        assert!(cfg
            .apply_text("bogus = 1")
            .unwrap_err()
            .to_string()
            .contains("unknown key"));
        assert!(cfg
            .apply_text("just words")
            .unwrap_err()
            .to_string()
            .contains("line 1"));
        assert!(cfg.apply_text("w = fast").is_err());
    }

    #[test]
    fn rejects_out_of_range_values() {
        for (k, v) in [
            ("leaf_capacity", "0"),
            ("w", "-1"),
            ("alpha", "0"),
            ("lifetime_min", "20"),
            ("seeds", "0"),
            ("gamma", "1.5"),
            ("n_minibatches", "3"),
            ("parallel", "0"),
        ] {
            assert!(
                parse_config(None, &[(k.into(), v.into())]).is_err(),
                "{k}={v}"
            );
        }
    }

    #[test]
    fn flat_rebalance() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.flat_leaf_capacity().unwrap(), 15);
        assert_eq!(cfg.hierarchical_total(), 30);
        assert_eq!(cfg.capacities(TopologyMode::Flat).unwrap(), (15, 0));
        let odd = parse_config(
            None,
            &[
                ("parent_capacity".into(), "9".into()),
                ("topology".into(), "flat".into()),
            ],
        );
        assert!(odd.is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("optimizer", "adam").unwrap();
        cfg.set("replicates", "2,7").unwrap();
        cfg.set("topology", "hierarchical,flat").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }
}
