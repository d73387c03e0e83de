use std::collections::BTreeMap;

use super::{normalized_energy, BinnedHits, MetricsRecord};
use crate::policies::PolicyKind;
use crate::sim::TopologyMode;

/// One setting/policy/topology combination averaged over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub w: f64,
    pub alpha: f64,
    pub policy: PolicyKind,
    pub topology: TopologyMode,
    /// Successful runs that went into the averages.
    pub runs: usize,
    pub failed: usize,
    pub hit_rate: f64,
    pub hit_rate_std: f64,
    pub leaf_hit_rate: f64,
    pub parent_hit_rate: f64,
    pub total_requests: f64,
    pub source_fetches: f64,
    pub energy: f64,
    pub energy_std: f64,
    /// Relative to ppo-proposed in the same setting and topology.
    pub energy_normalized: Option<f64>,
    pub avg_freshness: Option<f64>,
    pub mean_hops: f64,
    /// Hit counts summed over replicates.
    pub binned: BinnedHits,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type Key = (u64, u64, TopologyMode, PolicyKind);

fn key_of(w: f64, alpha: f64, topology: TopologyMode, policy: PolicyKind) -> Key {
    (w.to_bits(), alpha.to_bits(), topology, policy)
}

/// Seed-averages records. `failures` lists the setting of every failed run
/// so it can be counted. Rows keep first-appearance order.
pub fn aggregate(
    records: &[MetricsRecord],
    failures: &[(f64, f64, PolicyKind, TopologyMode)],
) -> Vec<SummaryRow> {
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, (Vec<&MetricsRecord>, usize)> = BTreeMap::new();
    for r in records {
        let k = key_of(r.w, r.alpha, r.topology, r.policy);
        let g = groups.entry(k).or_insert_with(|| {
            order.push(k);
            (Vec::new(), 0)
        });
        g.0.push(r);
    }
    for &(w, alpha, policy, topology) in failures {
        let k = key_of(w, alpha, topology, policy);
        let g = groups.entry(k).or_insert_with(|| {
            order.push(k);
            (Vec::new(), 0)
        });
        g.1 += 1;
    }

    let mut rows: Vec<SummaryRow> = order
        .iter()
        .map(|k| {
            let (rs, failed) = &groups[k];
            let col =
                |f: fn(&MetricsRecord) -> f64| -> Vec<f64> { rs.iter().map(|r| f(r)).collect() };
            let (hit_rate, hit_rate_std) = mean_std(&col(|r| r.hit_rate));
            let (energy, energy_std) = mean_std(&col(|r| r.energy_total));
            let fresh: Vec<f64> = rs.iter().filter_map(|r| r.avg_freshness).collect();
            let mut binned = BinnedHits::default();
            for r in rs {
                binned.add(&r.binned);
            }
            SummaryRow {
                w: f64::from_bits(k.0),
                alpha: f64::from_bits(k.1),
                policy: k.3,
                topology: k.2,
                runs: rs.len(),
                failed: *failed,
                hit_rate,
                hit_rate_std,
                leaf_hit_rate: mean_std(&col(|r| r.leaf_hit_rate)).0,
                parent_hit_rate: mean_std(&col(|r| r.parent_hit_rate)).0,
                total_requests: mean_std(&col(|r| r.total_requests as f64)).0,
                source_fetches: mean_std(&col(|r| r.source_fetches as f64)).0,
                energy,
                energy_std,
                energy_normalized: None,
                avg_freshness: (!fresh.is_empty()).then(|| mean_std(&fresh).0),
                mean_hops: mean_std(&col(|r| r.mean_hop_count)).0,
                binned,
            }
        })
        .collect();

    let mut by_setting: BTreeMap<(u64, u64, TopologyMode), BTreeMap<PolicyKind, f64>> =
        BTreeMap::new();
    for r in rows.iter().filter(|r| r.runs > 0) {
        by_setting
            .entry((r.w.to_bits(), r.alpha.to_bits(), r.topology))
            .or_default()
            .insert(r.policy, r.energy);
    }
    for r in &mut rows {
        let energies = &by_setting
            .get(&(r.w.to_bits(), r.alpha.to_bits(), r.topology))
            .cloned()
            .unwrap_or_default();
        if let Ok(n) = normalized_energy(energies, PolicyKind::PpoProposed) {
            r.energy_normalized = n.get(&r.policy).copied();
        }
    }
    rows
}
