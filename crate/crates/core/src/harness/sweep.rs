//! Grids of runs over misspecification levels, algorithms and seeds.

use std::path::Path;

use rayon::prelude::*;

use super::build::build_environment;
use super::config::{AlgorithmName, RunConfig, ZetaSetting};
use super::format::fmt_g12;
use super::run::{run_seed, thread_pool, write_outputs, SeedRun};
use crate::env::InjectionMode;
use crate::error::{Error, Result};

/// One point of the grid.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub name: String,
    pub algorithm: AlgorithmName,
    pub zeta: Option<f64>,
    pub config: RunConfig,
}

/// Aggregate of one cell over its seeds.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub runs: Vec<SeedRun>,
    /// `(seed, message)` for seeds that failed.
    pub errors: Vec<(u64, String)>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

/// Expands the `[sweep]` axes; an empty or missing axis keeps the base value.
pub fn sweep_cells(cfg: &RunConfig) -> Vec<SweepCell> {
    let sweep = cfg.sweep.clone().unwrap_or(super::config::SweepSection {
        zetas: Vec::new(),
        algorithms: Vec::new(),
    });
    let algorithms = if sweep.algorithms.is_empty() {
        vec![cfg.algorithm.name]
    } else {
        sweep.algorithms.clone()
    };
    let zetas: Vec<Option<f64>> = if sweep.zetas.is_empty() {
        vec![None]
    } else {
        sweep.zetas.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    for &alg in &algorithms {
        for &zeta in &zetas {
            let mut c = cfg.clone();
            c.sweep = None;
            c.algorithm.name = alg;
            if alg == AlgorithmName::Meta {
                c.algorithm.zeta = ZetaSetting::Word(super::config::UnknownWord::Unknown);
            } else {
                c.algorithm.base = None;
            }
            if let Some(z) = zeta {
                if c.env.injector.mode != InjectionMode::None {
                    c.env.injector.zeta = z;
                }
                if alg != AlgorithmName::Meta {
                    c.algorithm.zeta = ZetaSetting::Known(z);
                }
            }
            let name = match zeta {
                Some(z) => format!("{}_zeta{}", alg.as_str(), fmt_g12(z)),
                None => alg.as_str().to_string(),
            };
            cells.push(SweepCell {
                name,
                algorithm: alg,
                zeta,
                config: c,
            });
        }
    }
    cells
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Runs every `(cell, seed)` pair on up to `jobs` threads. Failures stay
/// attached to their cell; the other cells still report.
pub fn run_sweep(cfg: &RunConfig, out: Option<&Path>, jobs: Option<usize>) -> Result<Vec<CellSummary>> {
    let cells = sweep_cells(cfg);
    let pool = thread_pool(jobs)?;
    let tasks: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| cfg.run.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<(usize, u64, Result<SeedRun>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, seed)| {
                let cell = &cells[c].config;
                let res = build_environment(&cell.env).and_then(|env| run_seed(cell, &env, seed));
                (c, seed, res)
            })
            .collect()
    });
    let mut summaries: Vec<CellSummary> = cells
        .into_iter()
        .map(|cell| CellSummary {
            cell,
            runs: Vec::new(),
            errors: Vec::new(),
            median: None,
            q1: None,
            q3: None,
        })
        .collect();
    for (c, seed, res) in results {
        match res {
            Ok(run) => summaries[c].runs.push(run),
            Err(e) => summaries[c].errors.push((seed, e.to_string())),
        }
    }
    for s in &mut summaries {
        let mut finals: Vec<f64> = s.runs.iter().map(|r| r.log.final_regret()).collect();
        finals.sort_by(f64::total_cmp);
        s.median = quantile(&finals, 0.5);
        s.q1 = quantile(&finals, 0.25);
        s.q3 = quantile(&finals, 0.75);
    }
    if let Some(dir) = out {
        write_sweep(&summaries, dir)?;
    }
    Ok(summaries)
}

fn write_sweep(summaries: &[CellSummary], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("sweep_summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["cell", "algorithm", "zeta", "seeds", "failed", "median", "q1", "q3", "errors"])?;
    for s in summaries {
        if !s.runs.is_empty() {
            write_outputs(&s.cell.config, &s.runs, &dir.join(&s.cell.name))?;
        }
        let errors: Vec<String> = s.errors.iter().map(|(seed, e)| format!("seed {seed}: {e}")).collect();
        w.write_record([
            s.cell.name.clone(),
            s.cell.algorithm.as_str().to_string(),
            s.cell.zeta.map(fmt_g12).unwrap_or_default(),
            s.runs.len().to_string(),
            s.errors.len().to_string(),
            s.median.map(fmt_g12).unwrap_or_default(),
            s.q1.map(fmt_g12).unwrap_or_default(),
            s.q3.map(fmt_g12).unwrap_or_default(),
            errors.join("; "),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
