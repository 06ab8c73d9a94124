//! Command-line front end: `run`, `sweep`, `eluder` and `verify`.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 for
//! runtime failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::RunConfig;
use super::format::fmt_g12;
use super::run::run_experiment;
use super::sweep::run_sweep;
use super::verify::{verify_environment, write_report};
use crate::eluder::{eluder_dimension, EluderMode, EluderQuery, MAX_EXHAUSTIVE_DOMAIN};
use crate::error::{Error, Result};
use crate::general_agent::FiniteFunctionClass;

#[derive(Debug, Parser)]
#[command(name = "robust-rl", version, about = "Optimistic RL under locally-bounded misspecification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `run.out`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds replacing `run.seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Exhaustive up to the size limit, greedy beyond it.
    Auto,
    Exhaustive,
    Greedy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration for every seed.
    Run(RunArgs),
    /// Run the cross-product of `[sweep]` axes and seeds.
    Sweep(RunArgs),
    /// Eluder dimension of a function-class file over all state-action pairs.
    Eluder {
        #[arg(long)]
        class: PathBuf,
        /// Horizon `H`; class values must lie in `[0, H+1]`.
        #[arg(long)]
        horizon: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write `eluder.csv` here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report misspecification moments of the configured environment.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        if seeds.is_empty() {
            return Err(Error::Config("--seeds: at least one seed is required".into()));
        }
        cfg.run.seeds = seeds.clone();
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(args) => {
            let (cfg, out) = load(&args)?;
            let runs = run_experiment(&cfg, Some(&out), args.jobs)?;
            for r in &runs {
                println!(
                    "seed {}: cumulative regret {} over {} episodes",
                    r.seed,
                    fmt_g12(r.log.final_regret()),
                    r.log.len()
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep(args) => {
            let (cfg, out) = load(&args)?;
            let cells = run_sweep(&cfg, Some(&out), args.jobs)?;
            for c in &cells {
                println!(
                    "{}: median {} (q1 {}, q3 {}), {} failed",
                    c.cell.name,
                    c.median.map(fmt_g12).unwrap_or_else(|| "-".into()),
                    c.q1.map(fmt_g12).unwrap_or_else(|| "-".into()),
                    c.q3.map(fmt_g12).unwrap_or_else(|| "-".into()),
                    c.errors.len()
                );
            }
            println!("wrote {}", out.display());
            if cells.iter().any(|c| !c.errors.is_empty()) {
                return Err(Error::Internal("some sweep cells failed; see sweep_summary.csv".into()));
            }
        }
        Command::Eluder {
            class,
            horizon,
            epsilons,
            mode,
            restarts,
            seed,
            out,
        } => {
            let class = FiniteFunctionClass::load(&class, horizon)?;
            eluder_table(&class, &epsilons, mode, restarts, seed, out.as_deref())?;
        }
        Command::Verify { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let (_, report) = verify_environment(&cfg)?;
            let zeta = cfg.env.injector.zeta;
            println!("pointwise max xi = {}", fmt_g12(report.pointwise_max_xi));
            for (b, m) in report.xi_moments.iter().enumerate() {
                println!("beta {}: E[xi^beta] max {} vs zeta^beta {}", b + 1, fmt_g12(*m), fmt_g12(zeta.powi(b as i32 + 1)));
            }
            println!("within zeta: {}", report.within(zeta, 1e-12));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write_report(&report, zeta, &dir.join("verify.csv"))?;
                println!("wrote {}", dir.display());
            }
        }
    }
    Ok(())
}

fn eluder_table(
    class: &FiniteFunctionClass,
    epsilons: &[f64],
    mode: ModeArg,
    restarts: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let domain: Vec<(usize, usize)> = (0..class.n_states())
        .flat_map(|s| (0..class.n_actions()).map(move |a| (s, a)))
        .collect();
    let mode = match mode {
        ModeArg::Exhaustive => EluderMode::Exhaustive,
        ModeArg::Greedy => EluderMode::Greedy { restarts, seed },
        ModeArg::Auto if domain.len() <= MAX_EXHAUSTIVE_DOMAIN => EluderMode::Exhaustive,
        ModeArg::Auto => EluderMode::Greedy { restarts, seed },
    };
    let mut rows = Vec::new();
    for &eps in epsilons {
        let q = EluderQuery::from_class(class, &domain, eps, mode).map_err(|e| Error::Config(e.to_string()))?;
        let res = eluder_dimension(&q).map_err(|e| Error::Config(e.to_string()))?;
        let label = if res.exact { "exhaustive" } else { "greedy_lower_bound" };
        rows.push([fmt_g12(eps), res.dimension.to_string(), label.to_string()]);
    }
    let write = |w: &mut csv::Writer<Box<dyn std::io::Write>>| -> Result<()> {
        w.write_record(["epsilon", "dimension", "mode"])?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io("<eluder>", e))
    };
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("eluder.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write(&mut csv::Writer::from_writer(Box::new(file)))?;
            println!("wrote {}", path.display());
        }
        None => write(&mut csv::Writer::from_writer(Box::new(std::io::stdout())))?,
    }
    Ok(())
}
