//! Reported quantities: hit rates, device energy, cached-file freshness and
//! hit breakdowns by lifetime and popularity.

mod csv_io;
mod plotdata;
mod summary;

use std::collections::BTreeMap;

pub use csv_io::{
    format_sig6, read_csv, runs_csv_string, write_csv, write_runs_csv, CSV_COLUMNS, RUN_COLUMNS,
};
pub use plotdata::write_plotdata;
pub use summary::{aggregate, SummaryRow};

use crate::error::{Error, Result};
use crate::policies::PolicyKind;
use crate::sim::{Catalog, EpisodeTrace, RegionPopularity, TimeStep, TopologyMode};

/// Lifetime bins: 2-5, 6-9, 10-14 (anything shorter or longer falls into
/// the nearest end bin).
pub const LIFETIME_BINS: [(u32, u32); 3] = [(2, 5), (6, 9), (10, 14)];
pub const POPULARITY_BINS: usize = 4;

pub fn lifetime_bin(lifetime: u32) -> usize {
    match lifetime {
        0..=5 => 0,
        6..=9 => 1,
        _ => 2,
    }
}

/// Quartile (0-based) of a 1-based popularity rank among `n_files`.
pub fn popularity_bin(rank: u32, n_files: usize) -> usize {
    ((rank as usize - 1) * POPULARITY_BINS / n_files).min(POPULARITY_BINS - 1)
}

/// Fraction of requests served by a cache; `None` without requests.
pub fn hit_rate(trace: &EpisodeTrace) -> Option<f64> {
    (trace.total_requests > 0).then(|| trace.cache_hits() as f64 / trace.total_requests as f64)
}

/// Time average of the per-step mean freshness of cached entries; `None`
/// when the caches never held anything.
pub fn average_freshness(trace: &EpisodeTrace) -> Option<f64> {
    let s = &trace.freshness_samples;
    (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
}

/// Cache-hit counts by file lifetime and by popularity quartile of the
/// requesting region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinnedHits {
    pub by_lifetime: [u64; 3],
    pub by_popularity: [u64; POPULARITY_BINS],
}

impl BinnedHits {
    pub fn add(&mut self, other: &BinnedHits) {
        for (a, b) in self.by_lifetime.iter_mut().zip(other.by_lifetime) {
            *a += b;
        }
        for (a, b) in self.by_popularity.iter_mut().zip(other.by_popularity) {
            *a += b;
        }
    }

    pub fn lifetime_shares(&self) -> Option<[f64; 3]> {
        shares(&self.by_lifetime)
    }

    pub fn popularity_shares(&self) -> Option<[f64; POPULARITY_BINS]> {
        shares(&self.by_popularity)
    }
}

fn shares<const N: usize>(counts: &[u64; N]) -> Option<[f64; N]> {
    let total: u64 = counts.iter().sum();
    (total > 0).then(|| counts.map(|c| c as f64 / total as f64))
}

pub fn binned_hit_stats(
    trace: &EpisodeTrace,
    catalog: &Catalog,
    regions: &[RegionPopularity],
) -> BinnedHits {
    let mut out = BinnedHits::default();
    for (leaf, hits) in trace.hits_by_region.iter().enumerate() {
        for (idx, &h) in hits.iter().enumerate() {
            if h == 0 {
                continue;
            }
            let file_id = idx as u32 + 1;
            out.by_lifetime[lifetime_bin(catalog.entry(file_id).lifetime)] += h;
            let rank = regions[leaf].rank_of(file_id);
            out.by_popularity[popularity_bin(rank, catalog.len())] += h;
        }
    }
    out
}

/// Each policy's energy divided by the reference policy's energy for the
/// same setting.
pub fn normalized_energy(
    energies: &BTreeMap<PolicyKind, f64>,
    reference: PolicyKind,
) -> Result<BTreeMap<PolicyKind, f64>> {
    let base = *energies.get(&reference).ok_or_else(|| {
        Error::Report(format!("no {reference} record to normalize energy against"))
    })?;
    Ok(energies
        .iter()
        .map(|(&k, &e)| (k, if k == reference { 1.0 } else { e / base }))
        .collect())
}

/// Evaluation result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub w: f64,
    pub alpha: f64,
    pub policy: PolicyKind,
    pub topology: TopologyMode,
    pub replicate: usize,
    pub seed: u64,
    pub steps: TimeStep,
    pub total_requests: u64,
    pub leaf_hits: u64,
    pub parent_hits: u64,
    pub source_fetches: u64,
    pub hit_rate: f64,
    pub leaf_hit_rate: f64,
    pub parent_hit_rate: f64,
    pub energy_total: f64,
    pub avg_freshness: Option<f64>,
    pub binned: BinnedHits,
    pub mean_hop_count: f64,
}

/// Identifies a run inside the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLabel {
    pub w: f64,
    pub alpha: f64,
    pub policy: PolicyKind,
    pub topology: TopologyMode,
    pub replicate: usize,
    pub seed: u64,
}

impl MetricsRecord {
    /// Fails when the trace has no requests.
    pub fn from_trace(
        label: RunLabel,
        trace: &EpisodeTrace,
        catalog: &Catalog,
        regions: &[RegionPopularity],
    ) -> Result<Self> {
        let n = trace.total_requests;
        if n == 0 {
            return Err(Error::Report(
                "hit rate undefined: evaluation produced no requests".into(),
            ));
        }
        let nf = n as f64;
        Ok(MetricsRecord {
            w: label.w,
            alpha: label.alpha,
            policy: label.policy,
            topology: label.topology,
            replicate: label.replicate,
            seed: label.seed,
            steps: trace.horizon,
            total_requests: n,
            leaf_hits: trace.leaf_hits,
            parent_hits: trace.parent_hits,
            source_fetches: trace.source_fetches,
            hit_rate: trace.cache_hits() as f64 / nf,
            leaf_hit_rate: trace.leaf_hits as f64 / nf,
            parent_hit_rate: trace.parent_hits as f64 / nf,
            energy_total: trace.energy.total_energy(),
            avg_freshness: average_freshness(trace),
            binned: binned_hit_stats(trace, catalog, regions),
            mean_hop_count: trace.hop_total as f64 / nf,
        })
    }

    /// Requests are all accounted for and every fetch cost one cycle.
    pub fn conserves(&self) -> bool {
        self.leaf_hits + self.parent_hits + self.source_fetches == self.total_requests
            && self.energy_total == self.source_fetches as f64
    }
}
