//! Single runs: one learner, one environment, one seed per output file.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::build::{build_agent, build_environment, meta_config, Environment};
use super::config::{AlgorithmName, RunConfig};
use super::format::{fmt_g12, fmt_opt};
use super::regret::RegretLog;
use crate::agent::EpisodicAgent;
use crate::env::{evaluate_policy, exact_optimal_values, TabularMdp};
use crate::error::{Error, Result};
use crate::meta::{run_meta, EpochRecord};
use crate::rng::{stream, streams, Rng};

/// Runs `agent` for `episodes` episodes and records exact regret.
pub fn run_agent(agent: &mut dyn EpisodicAgent, mdp: &TabularMdp, episodes: usize, rng: &mut Rng) -> Result<RegretLog> {
    let v_star = exact_optimal_values(mdp).initial_value(mdp);
    let mut log = RegretLog::new(v_star);
    for _ in 0..episodes {
        let (plan, ep) = agent.step_episode(mdp, rng)?;
        let value = evaluate_policy(mdp, &plan.policy)?;
        log.push(value, plan.optimistic_value, ep.total_reward(), None);
    }
    Ok(log)
}

/// The outcome of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub log: RegretLog,
    /// Epoch records of a meta run.
    pub epochs: Option<Vec<EpochRecord>>,
    pub runtime: Duration,
}

/// Runs one seed on a prebuilt environment.
pub fn run_seed(cfg: &RunConfig, env: &Environment, seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let alg = &cfg.algorithm;
    let episodes = cfg.run.episodes;
    let mut rng = stream(seed, streams::EPISODES);
    let class_seed = cfg.env.seed;
    let (log, epochs) = if alg.name == AlgorithmName::Meta {
        let learner = alg.learner();
        let mut factory =
            |zeta: f64, len: usize| build_agent(alg, learner, env, zeta, len, seed, class_seed);
        let state = run_meta(&mut factory, &env.mdp, episodes, &meta_config(alg, env), &mut rng)?;
        (state.log, Some(state.epochs))
    } else {
        let zeta = alg.zeta.known().unwrap_or(0.0);
        let mut agent = build_agent(alg, alg.name, env, zeta, episodes, seed, class_seed)?;
        (run_agent(agent.as_mut(), &env.mdp, episodes, &mut rng)?, None)
    };
    log.check(1e-9)?;
    Ok(SeedRun {
        seed,
        log,
        epochs,
        runtime: start.elapsed(),
    })
}

pub(crate) fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

/// Runs every seed of `cfg`, in parallel on up to `jobs` threads, and
/// writes the outputs to `out` when given. Results come back in seed order.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>, jobs: Option<usize>) -> Result<Vec<SeedRun>> {
    let env = build_environment(&cfg.env)?;
    let pool = thread_pool(jobs)?;
    let runs: Vec<SeedRun> = pool.install(|| {
        cfg.run
            .seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, &env, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    if let Some(dir) = out {
        write_outputs(cfg, &runs, dir)?;
    }
    Ok(runs)
}

pub fn seed_file_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

/// Per-seed logs, meta epoch tables, `summary.csv` and `manifest.json`.
pub fn write_outputs(cfg: &RunConfig, runs: &[SeedRun], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for run in runs {
        run.log.save_csv(&dir.join(seed_file_name(run.seed)))?;
        if let Some(epochs) = &run.epochs {
            write_epochs(epochs, &dir.join(format!("seed_{}_epochs.csv", run.seed)))?;
        }
    }
    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["seed", "final_cumulative_regret", "runtime"])?;
    for run in runs {
        w.write_record([
            run.seed.to_string(),
            fmt_g12(run.log.final_regret()),
            fmt_g12(run.runtime.as_secs_f64()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&summary, e))?;
    write_manifest(cfg, &dir.join("manifest.json"))
}

pub fn write_epochs(epochs: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "zeta_guess", "epoch_len", "vbar", "violated"])?;
    for e in epochs {
        w.write_record([
            e.plan.index.to_string(),
            fmt_g12(e.plan.zeta),
            e.plan.len.to_string(),
            fmt_opt(e.vbar),
            e.violated.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_sha256: String,
    seeds: &'a [u64],
    episodes: usize,
    algorithm: &'a str,
    version: &'a str,
    config: String,
}

/// SHA-256 of the normalized config text.
pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

fn write_manifest(cfg: &RunConfig, path: &Path) -> Result<()> {
    let manifest = Manifest {
        config_sha256: config_hash(cfg),
        seeds: &cfg.run.seeds,
        episodes: cfg.run.episodes,
        algorithm: cfg.algorithm.name.as_str(),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.to_toml(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
