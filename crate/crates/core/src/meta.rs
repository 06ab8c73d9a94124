//! Running a base learner without knowing the misspecification level:
//! epochs with halving guesses, a stability test on realized returns, then
//! commitment to an earlier epoch's policy.

use crate::agent::EpisodicAgent;
use crate::env::{evaluate_policy, exact_optimal_values, sample_episode, MixturePolicy, PolicyTable, TabularMdp};
use crate::error::{Error, Result};
use crate::harness::{Phase, RegretLog};
use crate::rng::Rng;

/// One entry of the epoch schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochPlan {
    pub index: usize,
    /// `ζ^(i) = 2^{-i}`.
    pub zeta: f64,
    /// `K^(i) = 4^i = 1 / (ζ^(i))²`.
    pub nominal_len: usize,
    /// Length after truncation at the remaining budget; may be 0.
    pub len: usize,
}

/// Largest `m` with `4^m ≤ n`, i.e. `⌊log₂ √n⌋`.
fn floor_log4(n: u128) -> u32 {
    let mut m = 0;
    while 4u128.pow(m + 1) <= n {
        m += 1;
    }
    m
}

/// Smallest `m` with `4^m ≥ n`, i.e. `⌈log₂ √n⌉`.
fn ceil_log4(n: u128) -> u32 {
    let mut m = 0;
    while 4u128.pow(m) < n {
        m += 1;
    }
    m
}

/// Epochs `i = 0, ..., ⌊log₂ √(3K+1)⌋` with lengths truncated so that they
/// sum to exactly `budget`.
pub fn epoch_schedule(budget: usize) -> Result<Vec<EpochPlan>> {
    if budget == 0 {
        return Err(Error::param("episode budget must be at least 1"));
    }
    let last = floor_log4(3 * budget as u128 + 1);
    let mut remaining = budget;
    let mut plans = Vec::with_capacity(last as usize + 1);
    for i in 0..=last {
        let nominal = 4usize.pow(i);
        let len = nominal.min(remaining);
        remaining -= len;
        plans.push(EpochPlan {
            index: i as usize,
            zeta: 0.5f64.powi(i as i32),
            nominal_len: nominal,
            len,
        });
    }
    Ok(plans)
}

/// Regret exponents `(α, β)` of the base learner's bound `d^α H^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretExponents {
    pub alpha: f64,
    pub beta: f64,
}

impl RegretExponents {
    pub const LINEAR: Self = Self { alpha: 1.5, beta: 2.0 };
    pub const GENERAL: Self = Self { alpha: 1.0, beta: 1.5 };
}

/// `C = 3 √(8 H² log(2 ⌈log₂ √(3K+1)⌉ / δ)) + 6 L d^α H^β`.
pub fn stability_constant(
    dim: f64,
    horizon: usize,
    delta: f64,
    budget: usize,
    exponents: RegretExponents,
    l_const: f64,
) -> Result<f64> {
    if !(dim > 0.0) || horizon == 0 || budget == 0 {
        return Err(Error::param("dimension, horizon and budget must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(l_const >= 0.0) {
        return Err(Error::param(format!("L_const must be nonnegative, got {l_const}")));
    }
    let epochs = ceil_log4(3 * budget as u128 + 1) as f64;
    let arg = 2.0 * epochs / delta;
    let h = horizon as f64;
    let log = arg.ln();
    if !(arg > 0.0) || log < 0.0 {
        return Err(Error::param(format!("log argument {arg} is not at least 1")));
    }
    Ok(3.0 * (8.0 * h * h * log).sqrt() + 6.0 * l_const * dim.powf(exponents.alpha) * h.powf(exponents.beta))
}

/// Outcome of running a base learner for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    /// Mean realized return `V̄₁`.
    pub vbar: f64,
    /// The executed policies, in order; uniform mixture semantics.
    pub policy: MixturePolicy,
    pub returns: Vec<f64>,
    pub optimistic_values: Vec<Option<f64>>,
}

/// Runs `agent` for `len` episodes on `mdp`.
pub fn run_single_epoch(
    agent: &mut dyn EpisodicAgent,
    len: usize,
    mdp: &TabularMdp,
    rng: &mut Rng,
) -> Result<EpochOutcome> {
    if len == 0 {
        return Err(Error::param("an epoch needs at least one episode"));
    }
    let mut policies = Vec::with_capacity(len);
    let mut returns = Vec::with_capacity(len);
    let mut optimistic_values = Vec::with_capacity(len);
    for _ in 0..len {
        let (plan, log) = agent.step_episode(mdp, rng)?;
        returns.push(log.total_reward());
        optimistic_values.push(plan.optimistic_value);
        policies.push(plan.policy);
    }
    Ok(EpochOutcome {
        vbar: returns.iter().sum::<f64>() / len as f64,
        policy: MixturePolicy::new(policies)?,
        returns,
        optimistic_values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    pub delta: f64,
    pub l_const: f64,
    /// Feature dimension or measured eluder dimension of the base class.
    pub dim: f64,
    pub exponents: RegretExponents,
    /// Replaces the computed stability constant when set.
    pub stability_override: Option<f64>,
}

impl MetaConfig {
    pub fn linear(dim: usize) -> Self {
        Self {
            delta: 0.05,
            l_const: 1.0,
            dim: dim as f64,
            exponents: RegretExponents::LINEAR,
            stability_override: None,
        }
    }

    pub fn general(eluder_dim: f64) -> Self {
        Self {
            delta: 0.05,
            l_const: 1.0,
            dim: eluder_dim,
            exponents: RegretExponents::GENERAL,
            stability_override: None,
        }
    }

    pub fn stability(&self, horizon: usize, budget: usize) -> Result<f64> {
        match self.stability_override {
            Some(c) if c >= 0.0 => Ok(c),
            Some(c) => Err(Error::param(format!("stability constant must be nonnegative, got {c}"))),
            None => stability_constant(self.dim, horizon, self.delta, budget, self.exponents, self.l_const),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub plan: EpochPlan,
    /// `None` for epochs that never ran.
    pub vbar: Option<f64>,
    pub violated: bool,
}

/// Everything a meta run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaState {
    pub epochs: Vec<EpochRecord>,
    pub stability_constant: f64,
    /// Epoch whose policy filled the remaining budget.
    pub committed_epoch: Option<usize>,
    pub committed_policy: Option<MixturePolicy>,
    pub episodes_consumed: usize,
    pub log: RegretLog,
}

impl MetaState {
    pub fn violation_epoch(&self) -> Option<usize> {
        self.epochs.iter().find(|e| e.violated).map(|e| e.plan.index)
    }
}

/// Builds a fresh base learner for a guess `ζ` and an epoch of `len` episodes.
pub type AgentFactory<'a> = dyn FnMut(f64, usize) -> Result<Box<dyn EpisodicAgent>> + 'a;

/// Runs the epoch schedule, stops at the first stability violation and
/// commits to the previous epoch's mixture for the rest of the budget.
pub fn run_meta(
    factory: &mut AgentFactory<'_>,
    mdp: &TabularMdp,
    budget: usize,
    cfg: &MetaConfig,
    rng: &mut Rng,
) -> Result<MetaState> {
    let schedule = epoch_schedule(budget)?;
    let c = cfg.stability(mdp.horizon(), budget)?;
    let v_star = exact_optimal_values(mdp).initial_value(mdp);
    let mut log = RegretLog::new(v_star);
    let mut epochs: Vec<EpochRecord> = schedule
        .iter()
        .map(|&plan| EpochRecord {
            plan,
            vbar: None,
            violated: false,
        })
        .collect();
    let mut policies: Vec<Option<MixturePolicy>> = vec![None; schedule.len()];
    let mut committed = None;
    let mut consumed = 0;
    for (i, plan) in schedule.iter().enumerate() {
        if plan.len == 0 {
            break;
        }
        let mut agent = factory(plan.zeta, plan.len)?;
        let out = run_single_epoch(agent.as_mut(), plan.len, mdp, rng)?;
        for ((p, &ret), &opt) in out.policy.members().iter().zip(&out.returns).zip(&out.optimistic_values) {
            log.push(evaluate_policy(mdp, p)?, opt, ret, Some(Phase::Epoch(i)));
        }
        consumed += plan.len;
        epochs[i].vbar = Some(out.vbar);
        policies[i] = Some(out.policy);
        committed = Some(i);
        let full_enough = 2 * plan.len >= plan.nominal_len;
        if i >= 1 && full_enough {
            let prev = epochs[i - 1].vbar.expect("earlier epochs ran");
            if (out.vbar - prev).abs() > c * plan.zeta {
                epochs[i].violated = true;
                committed = Some(i - 1);
                break;
            }
        }
    }
    let committed_policy = committed.and_then(|j| policies[j].clone());
    if consumed < budget {
        let j = committed.ok_or_else(|| Error::Internal("no epoch completed".into()))?;
        let policy = committed_policy.as_ref().expect("committed epoch has a policy");
        let value = evaluate_policy(mdp, policy)?;
        for _ in consumed..budget {
            let ep = sample_episode(mdp, policy, log.len() + 1, rng)?;
            log.push(value, None, ep.total_reward(), Some(Phase::Commit(j)));
        }
    }
    Ok(MetaState {
        epochs,
        stability_constant: c,
        committed_epoch: committed,
        committed_policy,
        episodes_consumed: log.len(),
        log,
    })
}

/// A base learner that always returns the same table, for checking the
/// control flow of [`run_meta`].
pub fn fixed_policy_factory(policy: PolicyTable) -> impl FnMut(f64, usize) -> Result<Box<dyn EpisodicAgent>> {
    move |_, _| Ok(Box::new(crate::agent::FixedPolicyAgent::new(policy.clone())) as Box<dyn EpisodicAgent>)
}
