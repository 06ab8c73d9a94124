//! Turning a configuration into an environment and a learner.

use super::config::{AlgorithmConfig, AlgorithmName, ClassAnchor, ClassConfig, EnvConfig, EnvKind};
use crate::agent::EpisodicAgent;
use crate::env::{
    build_chain_env, build_linear_env, build_random_env, gate_region, inject_misspecification, InjectionMode,
    LinearMdpSpec, TabularMdp,
};
use crate::error::{Error, Result};
use crate::general_agent::{FiniteFunctionClass, GeneralLsviAgent, GeneralLsviConfig};
use crate::linear_agent::{LinearLsviAgent, LinearLsviConfig};
use crate::meta::{MetaConfig, RegretExponents};
use crate::model_agent::{biased_kernel, FiniteModelClass, UcrlVtrAgent, VtrConfig};
use crate::rng::{stream, streams};

/// An environment together with its linear description.
#[derive(Debug, Clone)]
pub struct Environment {
    /// The MDP the learner interacts with.
    pub mdp: TabularMdp,
    /// The true MDP before any time augmentation.
    pub base: TabularMdp,
    /// The exact linear MDP before injection; equals `base` when nothing is injected.
    pub linear_fit: TabularMdp,
    /// Features and measures of `linear_fit`; misspecified for `base`.
    pub spec: LinearMdpSpec,
}

/// Builds the environment from its config; all randomness comes from `env.seed`.
pub fn build_environment(cfg: &EnvConfig) -> Result<Environment> {
    let mut rng = stream(cfg.seed, streams::ENV);
    let (s, a, h) = (cfg.states, cfg.actions, cfg.horizon);
    let (exact, spec) = match cfg.kind {
        EnvKind::Linear => build_linear_env(cfg.dim.unwrap_or(s * a), s, a, h, &mut rng)?,
        EnvKind::Chain => {
            let mdp = build_chain_env(s, a, h, cfg.slip)?;
            let spec = LinearMdpSpec::one_hot(&mdp);
            (mdp, spec)
        }
        EnvKind::Random => {
            let mdp = build_random_env(s, a, h, &mut rng)?;
            let spec = LinearMdpSpec::one_hot(&mdp);
            (mdp, spec)
        }
    };
    let inj = cfg.injector.injector();
    let (linear_fit, spec) = if inj.mode == InjectionMode::LocalTrap {
        let gated = gate_region(&spec, &inj.trap_states, cfg.injector.exit_state, inj.reach_prob)?;
        (gated.to_mdp(exact.init_state())?, gated)
    } else {
        (exact, spec)
    };
    let base = inject_misspecification(&linear_fit, &spec, &inj, cfg.seed)?;
    let mdp = if cfg.time_augment {
        base.time_augmented()
    } else {
        base.clone()
    };
    Ok(Environment {
        mdp,
        base,
        linear_fit,
        spec,
    })
}

/// Builds a value class for the general learner.
pub fn build_function_class(cfg: &ClassConfig, env: &Environment, class_seed: u64) -> Result<FiniteFunctionClass> {
    let hz = env.mdp.horizon();
    if let Some(path) = &cfg.file {
        let class = FiniteFunctionClass::load(path, hz)?;
        if class.n_states() != env.mdp.n_states() || class.n_actions() != env.mdp.n_actions() {
            return Err(Error::Config(format!(
                "{}: class is {}x{}, environment is {}x{}",
                path.display(),
                class.n_states(),
                class.n_actions(),
                env.mdp.n_states(),
                env.mdp.n_actions()
            )));
        }
        return Ok(class);
    }
    let anchor = match cfg.anchor {
        ClassAnchor::Truth => env.mdp.clone(),
        ClassAnchor::LinearFit => lift(env, &env.linear_fit),
        ClassAnchor::Biased => lift(env, &biased_kernel(&env.base, cfg.anchor_zeta)?),
    };
    let mut rng = stream(class_seed, streams::CLASS);
    let class = if cfg.layered {
        FiniteFunctionClass::layered_around_optimal(&anchor, cfg.perturbed, cfg.scale, &mut rng)
    } else {
        FiniteFunctionClass::around_optimal(&anchor, cfg.perturbed, cfg.scale, &mut rng)
    };
    class.map_err(|e| match e {
        Error::Construction(m) => Error::Config(format!("algorithm.class: {m} (set env.time_augment = true)")),
        e => e,
    })
}

/// Builds a model class for the VTR learner. Perturbed copies are always
/// drawn around the truth, so all anchors share them.
pub fn build_model_class(cfg: &ClassConfig, env: &Environment, class_seed: u64) -> Result<FiniteModelClass> {
    if let Some(path) = &cfg.file {
        let class = FiniteModelClass::load(path)?;
        let m = class.member(0);
        if m.horizon() != env.mdp.horizon() || m.n_states() != env.mdp.n_states() || m.n_actions() != env.mdp.n_actions()
        {
            return Err(Error::Config(format!("{}: class shape differs from the environment", path.display())));
        }
        return Ok(class);
    }
    let mut rng = stream(class_seed, streams::CLASS);
    let around = FiniteModelClass::around_truth(&env.mdp, cfg.perturbed, cfg.min_tv, cfg.max_tv, &mut rng)?;
    let anchor = match cfg.anchor {
        ClassAnchor::Truth => return Ok(around),
        ClassAnchor::LinearFit => lift(env, &env.linear_fit),
        ClassAnchor::Biased => lift(env, &biased_kernel(&env.base, cfg.anchor_zeta)?),
    };
    let mut members = around.members().to_vec();
    members[0] = anchor;
    FiniteModelClass::new(members)
}

/// `mdp` in the state space of `env.mdp`.
fn lift(env: &Environment, mdp: &TabularMdp) -> TabularMdp {
    if env.mdp.n_states() == mdp.n_states() {
        mdp.clone()
    } else {
        mdp.time_augmented()
    }
}

/// Builds a learner for one run (or one meta epoch).
///
/// `zeta` and `episodes` override the config, which is how meta epochs set
/// their guesses; `run_seed` drives any internal sampling.
pub fn build_agent(
    alg: &AlgorithmConfig,
    learner: AlgorithmName,
    env: &Environment,
    zeta: f64,
    episodes: usize,
    run_seed: u64,
    class_seed: u64,
) -> Result<Box<dyn EpisodicAgent>> {
    let hz = env.mdp.horizon();
    let init = env.mdp.init_state();
    let default_class = ClassConfig::default();
    let class_cfg = alg.class.as_ref().unwrap_or(&default_class);
    let agent: Box<dyn EpisodicAgent> = match learner {
        AlgorithmName::LinearLsvi => {
            let cfg = LinearLsviConfig {
                c_beta: alg.c_beta,
                lambda: alg.lambda,
                delta: alg.delta,
                zeta,
                episodes,
            };
            Box::new(LinearLsviAgent::new(cfg, env.spec.clone(), hz, init)?)
        }
        AlgorithmName::GeneralLsvi => {
            let cfg = GeneralLsviConfig {
                delta: alg.delta,
                zeta,
                episodes,
                c_prime: alg.c_prime,
                cover_t: alg.cover_t,
                log_w: alg.log_w,
                subsample: alg.subsample,
            };
            let class = build_function_class(class_cfg, env, class_seed)?;
            Box::new(GeneralLsviAgent::new(cfg, class, hz, init, stream(run_seed, streams::SUBSAMPLE))?)
        }
        AlgorithmName::UcrlVtr => {
            let cfg = VtrConfig {
                delta: alg.delta,
                zeta,
                episodes,
                c_prime: alg.c_prime,
                alpha_cover: alg.alpha_cover,
            };
            Box::new(UcrlVtrAgent::new(cfg, build_model_class(class_cfg, env, class_seed)?)?)
        }
        AlgorithmName::Meta => return Err(Error::Config("algorithm.base: cannot be meta".into())),
    };
    Ok(agent)
}

/// Meta settings implied by the config and the base learner.
pub fn meta_config(alg: &AlgorithmConfig, env: &Environment) -> MetaConfig {
    let (dim, exponents) = match alg.learner() {
        AlgorithmName::LinearLsvi => (env.spec.dim() as f64, RegretExponents::LINEAR),
        _ => ((env.mdp.n_states() * env.mdp.n_actions()) as f64, RegretExponents::GENERAL),
    };
    MetaConfig {
        delta: alg.delta,
        l_const: alg.l_const,
        dim: alg.complexity.unwrap_or(dim),
        exponents,
        stability_override: alg.stability,
    }
}
