use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use iotcache::harness::{
    flat_comparison_config, grid_cells, parse_config, run_checks, run_grid_with, write_outputs,
    CellOutcome, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "iotcache",
    version,
    about = "Caching experiments for transient IoT data"
)]
struct Cli {
    /// Key-value config file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Number of replicates per setting.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Comma-separated policy names.
    #[arg(long, global = true)]
    policy: Option<String>,
    /// Grid cells run concurrently.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every (w, alpha, policy, topology, seed) cell.
    Grid,
    /// The proposed agent in hierarchical and flat mode at equal memory.
    FlatCompare,
    /// One (w, alpha) setting.
    Single {
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Numerical oracle and invariant checks.
    Check,
}

fn overrides(cli: &Cli) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if let Some(d) = &cli.out_dir {
        out.push(("out_dir".into(), d.display().to_string()));
    }
    if let Some(n) = cli.seeds {
        out.push(("seeds".into(), n.to_string()));
    }
    if let Some(p) = &cli.policy {
        out.push(("policy".into(), p.clone()));
    }
    if let Some(n) = cli.parallel {
        out.push(("parallel".into(), n.to_string()));
    }
    if let Some(s) = cli.master_seed {
        out.push(("master_seed".into(), s.to_string()));
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Command::Single { w, alpha } = &cli.command {
        if let Some(w) = w {
            out.push(("w".into(), w.to_string()));
        }
        if let Some(a) = alpha {
            out.push(("alpha".into(), a.to_string()));
        }
    }
    Ok(out)
}

fn run_and_write(cfg: &RunConfig) -> anyhow::Result<bool> {
    let total = grid_cells(cfg).len();
    let done = AtomicUsize::new(0);
    let start = Instant::now();
    let result = run_grid_with(cfg, |o: &CellOutcome| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        let c = &o.cell;
        let status = match &o.record {
            Ok(r) => format!("hit rate {:.4}", r.hit_rate),
            Err(m) => format!("FAILED: {m}"),
        };
        eprintln!(
            "[{k}/{total}] {:>7.1}s w={} alpha={} {} {} replicate {}: {status}",
            start.elapsed().as_secs_f64(),
            c.w,
            c.alpha,
            c.policy,
            c.topology,
            c.replicate
        );
    })?;
    let files = write_outputs(cfg, &result, &cfg.out_dir)
        .with_context(|| format!("writing results to {}", cfg.out_dir.display()))?;
    println!("wrote {}", files.results_csv.display());
    println!("wrote {}", files.runs_csv.display());
    println!("wrote {}/", files.plotdata.display());
    println!("wrote {}", files.manifest.display());
    if !files.checkpoints.is_empty() {
        println!("wrote {} checkpoints", files.checkpoints.len());
    }
    let failures = result.failures();
    for (c, m) in &failures {
        eprintln!(
            "failed: w={} alpha={} {} {} replicate {}: {m}",
            c.w, c.alpha, c.policy, c.topology, c.replicate
        );
    }
    Ok(failures.is_empty())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = parse_config(cli.config.as_deref(), &overrides(cli)?)?;
    match cli.command {
        Command::Grid | Command::Single { .. } => run_and_write(&cfg),
        Command::FlatCompare => run_and_write(&flat_comparison_config(&cfg)),
        Command::Check => {
            let results = run_checks(&cfg)?;
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
