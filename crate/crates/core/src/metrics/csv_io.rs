use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{BinnedHits, MetricsRecord, SummaryRow};
use crate::error::{Error, Result};

/// Column order of `results.csv`.
pub const CSV_COLUMNS: [&str; 25] = [
    "w",
    "alpha",
    "policy",
    "topology",
    "runs",
    "failed",
    "hit_rate",
    "hit_rate_std",
    "leaf_hit_rate",
    "parent_hit_rate",
    "total_requests",
    "source_fetches",
    "energy",
    "energy_std",
    "energy_normalized",
    "avg_freshness",
    "mean_hops",
    "hits_life_2_5",
    "hits_life_6_9",
    "hits_life_10_14",
    "hits_pop_q1",
    "hits_pop_q2",
    "hits_pop_q3",
    "hits_pop_q4",
    "ok",
];

/// Column order of `runs.csv`.
pub const RUN_COLUMNS: [&str; 24] = [
    "w",
    "alpha",
    "policy",
    "topology",
    "replicate",
    "seed",
    "steps",
    "total_requests",
    "leaf_hits",
    "parent_hits",
    "source_fetches",
    "hit_rate",
    "leaf_hit_rate",
    "parent_hit_rate",
    "energy",
    "avg_freshness",
    "mean_hops",
    "hits_life_2_5",
    "hits_life_6_9",
    "hits_life_10_14",
    "hits_pop_q1",
    "hits_pop_q2",
    "hits_pop_q3",
    "hits_pop_q4",
];

/// Formats a float with six significant digits, switching to exponent
/// notation outside `[1e-4, 1e6)` like C's `%g`.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

fn summary_fields(r: &SummaryRow) -> Vec<String> {
    let mut v = vec![
        format_sig6(r.w),
        format_sig6(r.alpha),
        r.policy.to_string(),
        r.topology.to_string(),
        r.runs.to_string(),
        r.failed.to_string(),
        format_sig6(r.hit_rate),
        format_sig6(r.hit_rate_std),
        format_sig6(r.leaf_hit_rate),
        format_sig6(r.parent_hit_rate),
        format_sig6(r.total_requests),
        format_sig6(r.source_fetches),
        format_sig6(r.energy),
        format_sig6(r.energy_std),
        opt(r.energy_normalized),
        opt(r.avg_freshness),
        format_sig6(r.mean_hops),
    ];
    v.extend(r.binned.by_lifetime.iter().map(u64::to_string));
    v.extend(r.binned.by_popularity.iter().map(u64::to_string));
    v.push(if r.failed == 0 { "1" } else { "0" }.into());
    v
}

fn run_fields(r: &MetricsRecord) -> Vec<String> {
    let mut v = vec![
        format_sig6(r.w),
        format_sig6(r.alpha),
        r.policy.to_string(),
        r.topology.to_string(),
        r.replicate.to_string(),
        r.seed.to_string(),
        r.steps.to_string(),
        r.total_requests.to_string(),
        r.leaf_hits.to_string(),
        r.parent_hits.to_string(),
        r.source_fetches.to_string(),
        format_sig6(r.hit_rate),
        format_sig6(r.leaf_hit_rate),
        format_sig6(r.parent_hit_rate),
        format_sig6(r.energy_total),
        opt(r.avg_freshness),
        format_sig6(r.mean_hop_count),
    ];
    v.extend(r.binned.by_lifetime.iter().map(u64::to_string));
    v.extend(r.binned.by_popularity.iter().map(u64::to_string));
    v
}

fn write_rows<W, I>(out: W, header: &[&str], rows: I) -> csv::Result<W>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error().into())
}

fn write_file<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut file = write_rows(file, header, rows).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    file.flush().map_err(|e| Error::io(path, e))
}

/// The text [`write_runs_csv`] would write.
pub fn runs_csv_string(records: &[MetricsRecord]) -> String {
    let bytes = write_rows(Vec::new(), &RUN_COLUMNS, records.iter().map(run_fields))
        .expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("fields are ASCII")
}

/// Writes seed-averaged rows; an empty slice produces a header-only file.
pub fn write_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_file(path, &CSV_COLUMNS, rows.iter().map(summary_fields))
}

/// Writes one row per run.
pub fn write_runs_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    write_file(path, &RUN_COLUMNS, records.iter().map(run_fields))
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| Error::Report(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let ctx = |i: usize| format!("row {}, column {}", line + 1, CSV_COLUMNS[i]);
        let f = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("{}: not a number", ctx(i))))
        };
        let of = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let u = |i: usize| -> Result<u64> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("{}: not an integer", ctx(i))))
        };
        let mut binned = BinnedHits::default();
        for (j, slot) in binned.by_lifetime.iter_mut().enumerate() {
            *slot = u(17 + j)?;
        }
        for (j, slot) in binned.by_popularity.iter_mut().enumerate() {
            *slot = u(20 + j)?;
        }
        out.push(SummaryRow {
            w: f(0)?,
            alpha: f(1)?,
            policy: field(2)
                .parse()
                .map_err(|e| bad(format!("{}: {e}", ctx(2))))?,
            topology: field(3)
                .parse()
                .map_err(|e| bad(format!("{}: {e}", ctx(3))))?,
            runs: u(4)? as usize,
            failed: u(5)? as usize,
            hit_rate: f(6)?,
            hit_rate_std: f(7)?,
            leaf_hit_rate: f(8)?,
            parent_hit_rate: f(9)?,
            total_requests: f(10)?,
            source_fetches: f(11)?,
            energy: f(12)?,
            energy_std: f(13)?,
            energy_normalized: of(14)?,
            avg_freshness: of(15)?,
            mean_hops: f(16)?,
            binned,
        });
    }
    Ok(out)
}
