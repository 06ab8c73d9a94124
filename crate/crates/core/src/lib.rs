//! Optimistic reinforcement learning under locally-bounded misspecification.
//!
//! The crate provides small tabular episodic MDPs with exact dynamic-programming
//! oracles ([`env`]), three optimistic learners that stay robust when the
//! function class is only accurate *on average* under policy occupancies
//! ([`linear_agent`], [`general_agent`], [`model_agent`]), a meta-algorithm that
//! removes the need to know the misspecification level ([`meta`]), brute-force
//! complexity measures for finite classes ([`eluder`]), and an experiment
//! harness that writes exact-regret CSV logs ([`harness`]).
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run --release -p robust-rl --example chain_dynamic_programming
//! cargo run --release -p robust-rl --example linear_lsvi_regret
//! cargo run --release -p robust-rl --example local_trap_witness
//! cargo run --release -p robust-rl --example general_lsvi
//! cargo run --release -p robust-rl --example ucrl_vtr_optimism
//! cargo run --release -p robust-rl --example meta_unknown_zeta
//! cargo run --release -p robust-rl --example eluder_dimension
//! cargo run --release -p robust-rl --example config_sweep
//! ```

pub mod agent;
pub mod eluder;
pub mod env;
pub mod error;
pub mod general_agent;
pub mod harness;
pub mod linear_agent;
pub mod meta;
pub mod model_agent;
pub mod rng;

pub use error::{Error, Result};
