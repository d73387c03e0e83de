use super::{CatalogEntry, FileId, TimeStep};

/// Elapsed fraction of a file's lifetime; `>= 1` means expired.
pub fn compute_freshness(t_current: TimeStep, t_gen: TimeStep, lifetime: u32) -> f64 {
    assert!(
        t_current >= t_gen,
        "freshness queried before generation (t={t_current}, t_gen={t_gen})"
    );
    assert!(lifetime >= 1, "lifetime must be positive");
    (t_current - t_gen) as f64 / lifetime as f64
}

/// Integer form of `compute_freshness(..) >= 1`.
pub fn is_expired(t_current: TimeStep, t_gen: TimeStep, lifetime: u32) -> bool {
    t_current.saturating_sub(t_gen) >= lifetime as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CachedFile {
    pub file_id: FileId,
    pub t_gen: TimeStep,
    pub lifetime: u32,
    /// Cache hits served from this copy since it was stored.
    pub hits: u64,
}

impl CachedFile {
    /// A copy freshly produced by its device at step `t`.
    pub fn generated(entry: &CatalogEntry, t: TimeStep) -> Self {
        CachedFile {
            file_id: entry.file_id,
            t_gen: t,
            lifetime: entry.lifetime,
            hits: 0,
        }
    }

    pub fn freshness(&self, t: TimeStep) -> f64 {
        compute_freshness(t, self.t_gen, self.lifetime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Leaf,
    Parent,
}

/// Flattened agent input: `(id, freshness, hits)` per slot followed by the
/// requested file's `(id, lifetime)`, every component scaled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn len_for(capacity: usize) -> usize {
        3 * capacity + 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Observation {
    fn from(v: Vec<f64>) -> Self {
        Observation(v)
    }
}

/// Normalizers for [`CacheNode::observe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationScale {
    pub n_files: usize,
    pub lifetime_hi: u32,
    pub hit_cap: u32,
}

#[derive(Debug, Clone)]
pub struct CacheNode {
    id: usize,
    role: NodeRole,
    slots: Vec<Option<CachedFile>>,
    cumulative_hits: u64,
    // hit counts of entries that expired since the last decision event
    expired_since_decision: Vec<u64>,
}

impl CacheNode {
    pub fn new(id: usize, role: NodeRole, capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be at least one slot");
        CacheNode {
            id,
            role,
            slots: vec![None; capacity],
            cumulative_hits: 0,
            expired_since_decision: Vec::new(),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn role(&self) -> NodeRole {
        self.role
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn occupancy(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Slots in index order; action `j` addresses `slots()[j - 1]`.
    pub fn slots(&self) -> &[Option<CachedFile>] {
        &self.slots
    }

    /// Total hits served by this node during the run (`K`).
    pub fn cumulative_hits(&self) -> u64 {
        self.cumulative_hits
    }

    pub fn first_empty_slot(&self) -> Option<usize> {
        self.slots.iter().position(Option::is_none)
    }

    /// Slot index (0-based) holding `file_id`.
    pub fn find(&self, file_id: FileId) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| matches!(s, Some(f) if f.file_id == file_id))
    }

    /// Drops every entry whose freshness reached 1. Returns `(file_id, hits)`
    /// of the removed entries and queues them for the expiry penalty.
    pub fn evict_expired(&mut self, t: TimeStep) -> Vec<(FileId, u64)> {
        let mut removed = Vec::new();
        for slot in self.slots.iter_mut() {
            if let Some(f) = slot {
                if is_expired(t, f.t_gen, f.lifetime) {
                    removed.push((f.file_id, f.hits));
                    *slot = None;
                }
            }
        }
        self.expired_since_decision
            .extend(removed.iter().map(|&(_, hits)| hits));
        removed
    }

    /// Serves a hit from slot `index`.
    pub fn record_hit(&mut self, index: usize) {
        let f = self.slots[index]
            .as_mut()
            .expect("hit recorded on an empty slot");
        f.hits += 1;
        self.cumulative_hits += 1;
    }

    /// Action 0 skips; action `j >= 1` writes `file` into slot `j` with a
    /// zeroed hit counter, replacing the occupant. A copy of the same file in
    /// another slot is dropped first. Returns the displaced entries.
    pub fn apply_cache_action(&mut self, file: CachedFile, action: usize) -> Vec<CachedFile> {
        assert!(
            action <= self.capacity(),
            "cache action {action} out of range for capacity {}",
            self.capacity()
        );
        let mut displaced = Vec::new();
        if action == 0 {
            return displaced;
        }
        let target = action - 1;
        if let Some(dup) = self.find(file.file_id) {
            if dup != target {
                displaced.extend(self.slots[dup].take());
            }
        }
        let stored = CachedFile { hits: 0, ..file };
        displaced.extend(self.slots[target].replace(stored));
        displaced
    }

    /// Hit counts of entries expired since the previous call.
    pub fn drain_expired(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.expired_since_decision)
    }

    pub fn pending_expired(&self) -> &[u64] {
        &self.expired_since_decision
    }

    /// Mean freshness of resident entries, `None` when empty.
    pub fn mean_freshness(&self, t: TimeStep) -> Option<f64> {
        let (sum, n) = self
            .slots
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), f| (s + f.freshness(t), n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn observe(
        &self,
        requested: &CatalogEntry,
        t: TimeStep,
        scale: &ObservationScale,
    ) -> Observation {
        let n = scale.n_files as f64;
        let cap = scale.hit_cap.max(1) as f64;
        let mut v = Vec::with_capacity(Observation::len_for(self.capacity()));
        for slot in &self.slots {
            match slot {
                Some(f) => {
                    v.push(f.file_id as f64 / n);
                    v.push(f.freshness(t));
                    v.push((f.hits as f64).min(cap) / cap);
                }
                None => v.extend_from_slice(&[0.0, 0.0, 0.0]),
            }
        }
        v.push(requested.file_id as f64 / n);
        v.push((requested.lifetime as f64 / scale.lifetime_hi as f64).min(1.0));
        Observation(v)
    }
}
