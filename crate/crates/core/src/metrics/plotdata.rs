use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{format_sig6, BinnedHits, SummaryRow};
use crate::error::{Error, Result};
use crate::policies::{PolicyKind, DRL_REWARD_NOTE};
use crate::sim::TopologyMode;

fn sorted_unique(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let set: BTreeSet<u64> = xs.map(f64::to_bits).collect();
    let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// The grid value nearest to `target`.
fn nearest(values: &[f64], target: f64) -> Option<f64> {
    values
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
}

fn num(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_else(|| "nan".into())
}

fn find(
    rows: &[SummaryRow],
    w: f64,
    alpha: f64,
    policy: PolicyKind,
    topology: TopologyMode,
) -> Option<&SummaryRow> {
    rows.iter().find(|r| {
        r.w == w && r.alpha == alpha && r.policy == policy && r.topology == topology && r.runs > 0
    })
}

fn policies_in(rows: &[SummaryRow]) -> Vec<PolicyKind> {
    let set: BTreeSet<PolicyKind> = rows.iter().map(|r| r.policy).collect();
    set.into_iter().collect()
}

/// One series over `xs` per policy for a single topology.
fn sweep(
    rows: &[SummaryRow],
    title: &str,
    x_name: &str,
    xs: &[f64],
    at: impl Fn(f64) -> (f64, f64),
    value: impl Fn(&SummaryRow) -> (Option<f64>, Option<f64>),
) -> String {
    let policies = policies_in(rows);
    let mut s = format!("# {title}\n# {x_name}");
    for p in &policies {
        let _ = write!(s, " {p} {p}_std");
    }
    s.push('\n');
    for &x in xs {
        let (w, a) = at(x);
        s.push_str(&format_sig6(x));
        for &p in &policies {
            let (m, sd) = find(rows, w, a, p, TopologyMode::Hierarchical)
                .map(&value)
                .unwrap_or((None, None));
            let _ = write!(s, " {} {}", num(m), num(sd));
        }
        s.push('\n');
    }
    s
}

/// Writes whitespace-separated series files, one per figure, into `dir`.
pub fn write_plotdata(rows: &[SummaryRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ws = sorted_unique(rows.iter().map(|r| r.w));
    let alphas = sorted_unique(rows.iter().map(|r| r.alpha));
    let mut files: Vec<(&str, String)> = Vec::new();

    if let (Some(a_fix), Some(w_fix)) = (nearest(&alphas, 1.0), nearest(&ws, 2.0)) {
        let hit = |r: &SummaryRow| (Some(r.hit_rate), Some(r.hit_rate_std));
        let energy = |r: &SummaryRow| {
            (
                r.energy_normalized,
                r.energy_normalized.map(|n| n * r.energy_std / r.energy),
            )
        };
        let title_w =
            |what: &str| format!("{what} vs request rate w, alpha={}", format_sig6(a_fix));
        let title_a = |what: &str| format!("{what} vs skewness alpha, w={}", format_sig6(w_fix));
        files.push((
            "hit_rate_vs_w.dat",
            sweep(rows, &title_w("hit rate"), "w", &ws, |x| (x, a_fix), hit),
        ));
        files.push((
            "hit_rate_vs_alpha.dat",
            sweep(
                rows,
                &title_a("hit rate"),
                "alpha",
                &alphas,
                |x| (w_fix, x),
                hit,
            ),
        ));
        files.push((
            "energy_vs_w.dat",
            sweep(
                rows,
                &title_w("normalized energy"),
                "w",
                &ws,
                |x| (x, a_fix),
                energy,
            ),
        ));
        files.push((
            "energy_vs_alpha.dat",
            sweep(
                rows,
                &title_a("normalized energy"),
                "alpha",
                &alphas,
                |x| (w_fix, x),
                energy,
            ),
        ));
    }

    let mut s = String::from(
        "# ppo-proposed, hierarchical vs flat at equal total capacity\n\
         # w alpha hier_hit_rate hier_std flat_hit_rate flat_std hier_energy flat_energy\n",
    );
    for &w in &ws {
        for &a in &alphas {
            let h = find(
                rows,
                w,
                a,
                PolicyKind::PpoProposed,
                TopologyMode::Hierarchical,
            );
            let f = find(rows, w, a, PolicyKind::PpoProposed, TopologyMode::Flat);
            if h.is_none() && f.is_none() {
                continue;
            }
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {}",
                format_sig6(w),
                format_sig6(a),
                num(h.map(|r| r.hit_rate)),
                num(h.map(|r| r.hit_rate_std)),
                num(f.map(|r| r.hit_rate)),
                num(f.map(|r| r.hit_rate_std)),
                num(h.map(|r| r.energy)),
                num(f.map(|r| r.energy)),
            );
        }
    }
    files.push(("hier_vs_flat.dat", s));

    let policies = policies_in(rows);
    let pooled = |p: PolicyKind| {
        let mut b = BinnedHits::default();
        for r in rows
            .iter()
            .filter(|r| r.policy == p && r.topology == TopologyMode::Hierarchical)
        {
            b.add(&r.binned);
        }
        b
    };
    let mut life =
        String::from("# share of cache hits by file lifetime, pooled over the grid\n# bin");
    let mut pop = String::from(
        "# share of cache hits by popularity quartile, pooled over the grid\n# quartile",
    );
    let mut fresh = String::from("# grid-averaged cached-file freshness\n# policy avg_freshness\n");
    for p in &policies {
        let _ = write!(life, " {p}");
        let _ = write!(pop, " {p}");
        let fs: Vec<f64> = rows
            .iter()
            .filter(|r| r.policy == *p && r.topology == TopologyMode::Hierarchical)
            .filter_map(|r| r.avg_freshness)
            .collect();
        let mean = (!fs.is_empty()).then(|| fs.iter().sum::<f64>() / fs.len() as f64);
        let _ = writeln!(fresh, "{p} {}", num(mean));
    }
    life.push('\n');
    pop.push('\n');
    let life_shares: Vec<_> = policies
        .iter()
        .map(|&p| pooled(p).lifetime_shares())
        .collect();
    let pop_shares: Vec<_> = policies
        .iter()
        .map(|&p| pooled(p).popularity_shares())
        .collect();
    for (i, label) in ["2-5", "6-9", "10-14"].iter().enumerate() {
        life.push_str(label);
        for s in &life_shares {
            let _ = write!(life, " {}", num(s.map(|s| s[i])));
        }
        life.push('\n');
    }
    for i in 0..4 {
        let _ = write!(pop, "q{}", i + 1);
        for s in &pop_shares {
            let _ = write!(pop, " {}", num(s.map(|s| s[i])));
        }
        pop.push('\n');
    }
    files.push(("hits_by_lifetime.dat", life));
    files.push(("hits_by_popularity.dat", pop));
    files.push(("freshness.dat", fresh));

    let flag = policies.contains(&PolicyKind::DrlFreshness);
    for (name, body) in files {
        let path = dir.join(name);
        let body = if flag && body.contains("drl-freshness") {
            format!("# {DRL_REWARD_NOTE}\n{body}")
        } else {
            body
        };
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
