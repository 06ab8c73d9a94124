//! Ground-truth episodic MDPs: construction, misspecification injection,
//! exact dynamic programming, sampling, and assumption checks.

mod dp;
mod inject;
mod linear;
mod mdp;
mod policy;
mod verify;

pub use dp::{
    evaluate_policy, exact_optimal_values, first_reachable_step, occupancy_measure, policy_value_tables,
    uniform_occupancy, OptimalValues,
};
pub use inject::{inject_misspecification, max_reach_prob, InjectionMode, MisspecInjector};
pub use linear::{build_linear_env, gate_region, LinearMdpSpec};
pub use mdp::{build_chain_env, build_random_env, tv_distance, TabularMdp, ROW_SUM_TOL};
pub use policy::{greedy_action, sample_episode, EpisodeLog, MixturePolicy, PolicyRef, PolicyTable};
pub use verify::{
    pointwise_errors, region_seeking_probes, standard_probes, verify_lbm_assumption, AssumptionReport, ProbePolicy,
    MAX_MOMENT,
};

pub(crate) use mdp::dot;

