use std::fmt;
use std::str::FromStr;

use super::{CacheNode, NodeRole, RegionPopularity, Request};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyMode {
    /// Leaves backed by a caching parent.
    Hierarchical,
    /// Caching at the leaves only.
    Flat,
}

impl TopologyMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyMode::Hierarchical => "hierarchical",
            TopologyMode::Flat => "flat",
        }
    }
}

impl fmt::Display for TopologyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(TopologyMode::Hierarchical),
            "flat" => Ok(TopologyMode::Flat),
            other => Err(Error::config(format!(
                "unknown topology `{other}` (valid: hierarchical, flat)"
            ))),
        }
    }
}

/// Where a request was answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HitLevel {
    Leaf,
    Parent,
    Source,
}

/// Wake-generate-transmit cycles per device.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    cycles: Vec<u64>,
    energy_per_cycle: f64,
}

impl EnergyLedger {
    pub fn new(n_devices: usize, energy_per_cycle: f64) -> Self {
        EnergyLedger {
            cycles: vec![0; n_devices],
            energy_per_cycle,
        }
    }

    pub fn record_cycle(&mut self, device_id: u32) {
        self.cycles[device_id as usize - 1] += 1;
    }

    pub fn cycles(&self) -> &[u64] {
        &self.cycles
    }

    pub fn total_cycles(&self) -> u64 {
        self.cycles.iter().sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.total_cycles() as f64 * self.energy_per_cycle
    }
}

/// Cache nodes of one network plus each leaf's regional popularity.
///
/// Node ids are `0..n_leaves` for the leaves and `n_leaves` for the parent.
#[derive(Debug, Clone)]
pub struct Topology {
    mode: TopologyMode,
    leaves: Vec<CacheNode>,
    parent: Option<CacheNode>,
    regions: Vec<RegionPopularity>,
}

impl Topology {
    /// `parent_capacity` is ignored in flat mode.
    pub fn new(
        mode: TopologyMode,
        leaf_capacity: usize,
        parent_capacity: usize,
        regions: Vec<RegionPopularity>,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::config("topology needs at least one leaf"));
        }
        if leaf_capacity < 1 || (mode == TopologyMode::Hierarchical && parent_capacity < 1) {
            return Err(Error::config("cache capacities must be at least one slot"));
        }
        let leaves = (0..regions.len())
            .map(|i| CacheNode::new(i, NodeRole::Leaf, leaf_capacity))
            .collect();
        let parent = (mode == TopologyMode::Hierarchical)
            .then(|| CacheNode::new(regions.len(), NodeRole::Parent, parent_capacity));
        Ok(Topology {
            mode,
            leaves,
            parent,
            regions,
        })
    }

    pub fn mode(&self) -> TopologyMode {
        self.mode
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.leaves.len() + self.parent.is_some() as usize
    }

    pub fn parent_id(&self) -> Option<usize> {
        self.parent.as_ref().map(CacheNode::id)
    }

    pub fn total_capacity(&self) -> usize {
        self.nodes().map(CacheNode::capacity).sum()
    }

    pub fn leaf(&self, i: usize) -> &CacheNode {
        &self.leaves[i]
    }

    pub fn parent(&self) -> Option<&CacheNode> {
        self.parent.as_ref()
    }

    pub fn region(&self, leaf: usize) -> &RegionPopularity {
        &self.regions[leaf]
    }

    pub fn regions(&self) -> &[RegionPopularity] {
        &self.regions
    }

    pub fn node(&self, id: usize) -> &CacheNode {
        if id < self.leaves.len() {
            &self.leaves[id]
        } else {
            self.parent
                .as_ref()
                .expect("no parent node in flat topology")
        }
    }

    pub fn node_mut(&mut self, id: usize) -> &mut CacheNode {
        if id < self.leaves.len() {
            &mut self.leaves[id]
        } else {
            self.parent
                .as_mut()
                .expect("no parent node in flat topology")
        }
    }

    /// Leaves first, then the parent.
    pub fn nodes(&self) -> impl Iterator<Item = &CacheNode> {
        self.leaves.iter().chain(self.parent.iter())
    }

    pub fn nodes_mut(&mut self) -> impl Iterator<Item = &mut CacheNode> {
        self.leaves.iter_mut().chain(self.parent.iter_mut())
    }

    /// Empties every cache and resets hit counters.
    pub fn reset_caches(&mut self) {
        for node in self.nodes_mut() {
            *node = CacheNode::new(node.id(), node.role(), node.capacity());
        }
    }
}

/// Walks the request up the tree: requesting leaf, then the parent, then
/// the device. Hits bump the serving entry's counter and the node's `K`;
/// a device fetch costs one cycle in `ledger`. Hits never refresh `t_gen`.
pub fn lookup(topology: &mut Topology, request: &Request, ledger: &mut EnergyLedger) -> HitLevel {
    let leaf = &mut topology.leaves[request.leaf_id];
    if let Some(slot) = leaf.find(request.file_id) {
        leaf.record_hit(slot);
        return HitLevel::Leaf;
    }
    if let Some(parent) = topology.parent.as_mut() {
        if let Some(slot) = parent.find(request.file_id) {
            parent.record_hit(slot);
            return HitLevel::Parent;
        }
    }
    ledger.record_cycle(request.file_id);
    HitLevel::Source
}
