//! Configuration, runs, sweeps and output files.

mod build;
pub mod cli;
mod config;
mod format;
mod regret;
mod run;
mod sweep;
mod verify;

pub use build::{build_agent, build_environment, build_function_class, build_model_class, meta_config, Environment};
pub use config::{
    AlgorithmConfig, AlgorithmName, ClassAnchor, ClassConfig, EnvConfig, EnvKind, InjectorConfig, RunConfig,
    RunSection, SweepSection, UnknownWord, ZetaSetting,
};
pub use format::fmt_g12;
pub use regret::{Phase, RegretLog, RegretRecord, CSV_HEADER};
pub use run::{config_hash, run_agent, run_experiment, run_seed, seed_file_name, write_epochs, write_outputs, SeedRun};
pub use sweep::{quantile, run_sweep, sweep_cells, CellSummary, SweepCell};
pub use verify::{verify_environment, write_report};
