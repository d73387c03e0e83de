use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::seeds::{derive_seed, real_key};
use super::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, MetricsRecord, RunLabel, SummaryRow};
use crate::policies::{
    CachePolicy, LearnedPolicy, LearnedPolicyConfig, LfuPolicy, LruPolicy, PolicyKind,
};
use crate::rl::{network_digest, save_checkpoint, ActorCritic};
use crate::sim::{
    build_catalog, run_episode, zipf_pmf, Catalog, EpisodeConfig, ObservationScale,
    RegionPopularity, Topology, TopologyMode,
};

/// One coordinate of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub w: f64,
    pub alpha: f64,
    pub policy: PolicyKind,
    pub topology: TopologyMode,
    pub replicate: usize,
}

impl Cell {
    /// Per-run seed from every grid coordinate.
    pub fn run_seed(&self, master: u64) -> u64 {
        derive_seed(
            master,
            &[
                "run",
                &real_key(self.w),
                &real_key(self.alpha),
                self.policy.as_str(),
                self.topology.as_str(),
                &self.replicate.to_string(),
            ],
        )
    }

    /// Seed of the request stream for a phase. Independent of policy and
    /// topology so every policy faces the same requests.
    pub fn workload_seed(&self, master: u64, phase: &str) -> u64 {
        derive_seed(
            master,
            &[
                "workload",
                phase,
                &real_key(self.w),
                &real_key(self.alpha),
                &self.replicate.to_string(),
            ],
        )
    }

    /// Seed of the catalog and region permutations, shared by the whole
    /// replicate.
    pub fn environment_seed(&self, master: u64) -> u64 {
        derive_seed(master, &["environment", &self.replicate.to_string()])
    }

    pub fn label(&self, master: u64) -> RunLabel {
        RunLabel {
            w: self.w,
            alpha: self.alpha,
            policy: self.policy,
            topology: self.topology,
            replicate: self.replicate,
            seed: self.run_seed(master),
        }
    }

    /// File stem used for checkpoints.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_w{}_a{}_r{}",
            self.policy, self.topology, self.w, self.alpha, self.replicate
        )
    }
}

/// Trained parameters of one node.
#[derive(Debug, Clone)]
pub struct NodeNetwork {
    pub node: usize,
    pub network: ActorCritic,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub seed: u64,
    /// `Err` holds why the run was marked failed (e.g. divergence).
    pub record: std::result::Result<MetricsRecord, String>,
    pub networks: Vec<NodeNetwork>,
}

/// Catalog and per-region popularity for one replicate and skewness.
pub fn build_environment(cfg: &RunConfig, cell: &Cell) -> Result<(Catalog, Vec<RegionPopularity>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cell.environment_seed(cfg.master_seed));
    let catalog = build_catalog(cfg.n_devices, cfg.lifetime_min, cfg.lifetime_max, &mut rng)?;
    let pmf = zipf_pmf(cell.alpha, cfg.n_devices)?;
    let regions = (0..cfg.n_leaves)
        .map(|_| RegionPopularity::random(&pmf, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((catalog, regions))
}

fn build_policies(cfg: &RunConfig, cell: &Cell, topology: &Topology) -> Vec<Box<dyn CachePolicy>> {
    let run_seed = cell.run_seed(cfg.master_seed);
    (0..topology.n_nodes())
        .map(|i| -> Box<dyn CachePolicy> {
            match cell.policy {
                PolicyKind::Lru => Box::new(LruPolicy::new()),
                PolicyKind::Lfu => Box::new(LfuPolicy::new()),
                kind => Box::new(LearnedPolicy::new(
                    kind,
                    &LearnedPolicyConfig {
                        capacity: topology.node(i).capacity(),
                        hidden: cfg.hidden.clone(),
                        hyper: cfg.ppo.clone(),
                        binary_action: cfg.binary_action,
                        seed: derive_seed(run_seed, &["agent", &i.to_string()]),
                    },
                )),
            }
        })
        .collect()
}

fn episode_config(cfg: &RunConfig, cell: &Cell, horizon: u64) -> EpisodeConfig {
    EpisodeConfig {
        horizon,
        request_rate: cell.w,
        rewards: cfg.rewards,
        scale: ObservationScale {
            n_files: cfg.n_devices,
            lifetime_hi: cfg.lifetime_max,
            hit_cap: cfg.hit_cap,
        },
        decide_on_parent_hit: cfg.decide_on_parent_hit,
        record_transitions: false,
    }
}

fn digests(policies: &[Box<dyn CachePolicy>]) -> Vec<Option<String>> {
    policies
        .iter()
        .map(|p| p.network().map(network_digest))
        .collect()
}

/// Trains (learning policies only) and then evaluates one cell.
///
/// Divergence marks the outcome failed; broken invariants are errors.
pub fn run_cell(cfg: &RunConfig, cell: &Cell) -> Result<CellOutcome> {
    let seed = cell.run_seed(cfg.master_seed);
    let (catalog, regions) = build_environment(cfg, cell)?;
    let (leaf_cap, parent_cap) = cfg.capacities(cell.topology)?;
    let mut topology = Topology::new(cell.topology, leaf_cap, parent_cap, regions.clone())?;
    let mut policies = build_policies(cfg, cell, &topology);
    let failed = |msg: String| CellOutcome {
        cell: *cell,
        seed,
        record: Err(msg),
        networks: Vec::new(),
    };

    if cell.policy.is_learning() && cfg.train_steps > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cell.workload_seed(cfg.master_seed, "train"));
        let ep = episode_config(cfg, cell, cfg.train_steps);
        match run_episode(&mut topology, &catalog, &mut policies, &ep, &mut rng) {
            Ok(_) => {}
            Err(Error::Divergence(m)) => return Ok(failed(format!("training diverged: {m}"))),
            Err(e) => return Err(e),
        }
        if policies
            .iter()
            .any(|p| p.network().is_some_and(|n| !n.is_finite()))
        {
            return Ok(failed("training produced non-finite parameters".into()));
        }
        topology.reset_caches();
    }
    for p in policies.iter_mut() {
        p.set_training(false);
    }

    let before = digests(&policies);
    let mut rng = ChaCha8Rng::seed_from_u64(cell.workload_seed(cfg.master_seed, "eval"));
    let ep = episode_config(cfg, cell, cfg.eval_steps);
    let trace = match run_episode(&mut topology, &catalog, &mut policies, &ep, &mut rng) {
        Ok(t) => t,
        Err(Error::Divergence(m)) => return Ok(failed(format!("evaluation diverged: {m}"))),
        Err(e) => return Err(e),
    };
    if digests(&policies) != before {
        return Err(Error::Report(format!(
            "{}: evaluation changed agent parameters",
            cell.stem()
        )));
    }

    let record =
        match MetricsRecord::from_trace(cell.label(cfg.master_seed), &trace, &catalog, &regions) {
            Ok(r) => r,
            Err(e) => return Ok(failed(e.to_string())),
        };
    if !record.conserves() {
        return Err(Error::Report(format!(
            "{}: conservation violated ({} + {} + {} vs {} requests, energy {})",
            cell.stem(),
            record.leaf_hits,
            record.parent_hits,
            record.source_fetches,
            record.total_requests,
            record.energy_total
        )));
    }
    let networks = policies
        .iter()
        .enumerate()
        .filter_map(|(node, p)| {
            p.network().map(|n| NodeNetwork {
                node,
                network: n.clone(),
            })
        })
        .collect();
    Ok(CellOutcome {
        cell: *cell,
        seed,
        record: Ok(record),
        networks,
    })
}

/// Grid cells in output order: w, alpha, topology, policy, replicate.
pub fn grid_cells(cfg: &RunConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &w in &cfg.request_rates {
        for &alpha in &cfg.alphas {
            for &topology in &cfg.topologies {
                for &policy in &cfg.policies {
                    for &replicate in &cfg.replicates {
                        cells.push(Cell {
                            w,
                            alpha,
                            policy,
                            topology,
                            replicate,
                        });
                    }
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub outcomes: Vec<CellOutcome>,
    pub rows: Vec<SummaryRow>,
}

impl GridResult {
    pub fn records(&self) -> Vec<MetricsRecord> {
        self.outcomes
            .iter()
            .filter_map(|o| o.record.clone().ok())
            .collect()
    }

    pub fn failures(&self) -> Vec<(Cell, String)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.record.as_ref().err().map(|m| (o.cell, m.clone())))
            .collect()
    }

    pub fn all_ok(&self) -> bool {
        self.outcomes.iter().all(|o| o.record.is_ok())
    }

    pub fn row(
        &self,
        w: f64,
        alpha: f64,
        policy: PolicyKind,
        topology: TopologyMode,
    ) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.w == w && r.alpha == alpha && r.policy == policy && r.topology == topology)
    }
}

/// Runs every cell of the grid, up to `cfg.parallel` at a time, and
/// aggregates over replicates. `progress` sees each outcome as it lands.
pub fn run_grid_with<F>(cfg: &RunConfig, progress: F) -> Result<GridResult>
where
    F: Fn(&CellOutcome) + Sync,
{
    cfg.validate()?;
    let cells = grid_cells(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let o = run_cell(cfg, c)?;
                progress(&o);
                Ok(o)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let records: Vec<MetricsRecord> = outcomes
        .iter()
        .filter_map(|o| o.record.clone().ok())
        .collect();
    let failures: Vec<_> = outcomes
        .iter()
        .filter(|o| o.record.is_err())
        .map(|o| (o.cell.w, o.cell.alpha, o.cell.policy, o.cell.topology))
        .collect();
    let rows = aggregate(&records, &failures);
    Ok(GridResult { outcomes, rows })
}

pub fn run_grid(cfg: &RunConfig) -> Result<GridResult> {
    run_grid_with(cfg, |_| {})
}

/// The proposed agent in hierarchical and flat mode at equal total memory.
pub fn flat_comparison_config(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        policies: vec![PolicyKind::PpoProposed],
        topologies: vec![TopologyMode::Hierarchical, TopologyMode::Flat],
        ..cfg.clone()
    }
}

pub fn run_flat_comparison(cfg: &RunConfig) -> Result<GridResult> {
    run_grid(&flat_comparison_config(cfg))
}

/// Saves every trained network as `<dir>/<cell>_node<i>.bin`.
pub fn save_checkpoints(result: &GridResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for o in &result.outcomes {
        for n in &o.networks {
            if paths.is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let p = dir.join(format!("{}_node{}.bin", o.cell.stem(), n.node));
            save_checkpoint(&n.network, &p)?;
            paths.push(p);
        }
    }
    Ok(paths)
}
