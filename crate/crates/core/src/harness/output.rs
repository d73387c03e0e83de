use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::runner::{save_checkpoints, GridResult};
use super::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{write_csv, write_plotdata, write_runs_csv};
use crate::policies::{PolicyKind, DRL_REWARD_NOTE};

/// Files written for one grid run.
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub results_csv: PathBuf,
    pub runs_csv: PathBuf,
    pub plotdata: PathBuf,
    pub manifest: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

/// Writes `results.csv`, `runs.csv`, `plotdata/`, `checkpoints/` (if
/// enabled) and `run-manifest.txt` under `dir`.
pub fn write_outputs(cfg: &RunConfig, result: &GridResult, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results_csv = dir.join("results.csv");
    write_csv(&result.rows, &results_csv)?;
    let runs_csv = dir.join("runs.csv");
    write_runs_csv(&result.records(), &runs_csv)?;
    let plotdata = dir.join("plotdata");
    write_plotdata(&result.rows, &plotdata)?;
    let checkpoints = if cfg.save_checkpoints {
        save_checkpoints(result, &dir.join("checkpoints"))?
    } else {
        Vec::new()
    };
    let manifest = dir.join("run-manifest.txt");
    std::fs::write(&manifest, manifest_text(cfg, result)).map_err(|e| Error::io(&manifest, e))?;
    Ok(OutputFiles {
        results_csv,
        runs_csv,
        plotdata,
        manifest,
        checkpoints,
    })
}

/// Config echo, per-run seeds and versions. Contains no timestamps, so
/// identical runs produce identical manifests.
pub fn manifest_text(cfg: &RunConfig, result: &GridResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# iotcache {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        s,
        "# checkpoint format IOTCPPO1, random streams ChaCha8, seeds SHA-256"
    );
    if cfg.policies.contains(&PolicyKind::DrlFreshness) {
        let _ = writeln!(s, "# {DRL_REWARD_NOTE}");
    }
    s.push_str("\n[config]\n");
    s.push_str(&cfg.to_text());
    s.push_str("\n[runs]\n# w alpha policy topology replicate seed status\n");
    for o in &result.outcomes {
        let c = &o.cell;
        let status = match &o.record {
            Ok(_) => "ok".to_string(),
            Err(m) => format!("failed: {m}"),
        };
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {}",
            c.w, c.alpha, c.policy, c.topology, c.replicate, o.seed, status
        );
    }
    s
}
