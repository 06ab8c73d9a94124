//! The interface shared by all learners: plan a policy, run it, absorb the data.

use crate::env::{sample_episode, EpisodeLog, PolicyTable, TabularMdp};
use crate::error::Result;
use crate::rng::Rng;

/// What an agent commits to at the start of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePlan {
    pub policy: PolicyTable,
    /// The agent's own estimate `V_1^k(s_1)`; `None` for agents without one.
    pub optimistic_value: Option<f64>,
}

pub trait EpisodicAgent: Send {
    /// Computes the policy for the next episode from the data seen so far.
    fn plan(&mut self) -> Result<EpisodePlan>;

    /// Appends a finished episode, which must have followed the last plan.
    fn observe(&mut self, log: &EpisodeLog) -> Result<()>;

    /// Number of episodes absorbed so far.
    fn episodes_seen(&self) -> usize;

    /// Plans, executes the plan on `mdp`, and absorbs the trajectory.
    fn step_episode(&mut self, mdp: &TabularMdp, rng: &mut Rng) -> Result<(EpisodePlan, EpisodeLog)> {
        let plan = self.plan()?;
        let log = sample_episode(mdp, &plan.policy, self.episodes_seen() + 1, rng)?;
        self.observe(&log)?;
        Ok((plan, log))
    }
}

impl<A: EpisodicAgent + ?Sized> EpisodicAgent for Box<A> {
    fn plan(&mut self) -> Result<EpisodePlan> {
        (**self).plan()
    }

    fn observe(&mut self, log: &EpisodeLog) -> Result<()> {
        (**self).observe(log)
    }

    fn episodes_seen(&self) -> usize {
        (**self).episodes_seen()
    }
}

/// Replays one fixed policy forever. Handy as a baseline and in tests.
#[derive(Debug, Clone)]
pub struct FixedPolicyAgent {
    policy: PolicyTable,
    value: Option<f64>,
    seen: usize,
}

impl FixedPolicyAgent {
    pub fn new(policy: PolicyTable) -> Self {
        Self {
            policy,
            value: None,
            seen: 0,
        }
    }

    /// Reports `value` as its optimistic estimate.
    pub fn with_value(policy: PolicyTable, value: f64) -> Self {
        Self {
            policy,
            value: Some(value),
            seen: 0,
        }
    }
}

impl EpisodicAgent for FixedPolicyAgent {
    fn plan(&mut self) -> Result<EpisodePlan> {
        Ok(EpisodePlan {
            policy: self.policy.clone(),
            optimistic_value: self.value,
        })
    }

    fn observe(&mut self, _log: &EpisodeLog) -> Result<()> {
        self.seen += 1;
        Ok(())
    }

    fn episodes_seen(&self) -> usize {
        self.seen
    }
}
