use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mdp::TabularMdp;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Deterministic nonstationary policy, `action(h, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyTable {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    actions: Vec<usize>,
}

impl PolicyTable {
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != horizon * n_states {
            return Err(Error::dim(format!(
                "policy has {} entries, expected H*S = {}",
                actions.len(),
                horizon * n_states
            )));
        }
        if let Some(a) = actions.iter().find(|a| **a >= n_actions) {
            return Err(Error::param(format!("action {a} out of range 0..{n_actions}")));
        }
        Ok(Self {
            horizon,
            n_states,
            n_actions,
            actions,
        })
    }

    /// Policy taking the same action everywhere.
    pub fn constant(mdp: &TabularMdp, action: usize) -> Result<Self> {
        Self::new(
            mdp.horizon(),
            mdp.n_states(),
            mdp.n_actions(),
            vec![action; mdp.horizon() * mdp.n_states()],
        )
    }

    /// Greedy policy of step-indexed Q tables (`q[h][s * A + a]`); lowest action wins ties.
    pub fn greedy(q: &[Vec<f64>], n_states: usize, n_actions: usize) -> Self {
        let horizon = q.len();
        let mut actions = Vec::with_capacity(horizon * n_states);
        for qh in q {
            for s in 0..n_states {
                actions.push(greedy_action(&qh[s * n_actions..(s + 1) * n_actions]));
            }
        }
        Self {
            horizon,
            n_states,
            n_actions,
            actions,
        }
    }

    pub fn random(mdp: &TabularMdp, rng: &mut Rng) -> Self {
        let actions = (0..mdp.horizon() * mdp.n_states())
            .map(|_| rng.random_range(0..mdp.n_actions()))
            .collect();
        Self {
            horizon: mdp.horizon(),
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            actions,
        }
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.n_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub(crate) fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.horizon != mdp.horizon() || self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::dim(format!(
                "policy shape (H={}, S={}, A={}) does not match MDP (H={}, S={}, A={})",
                self.horizon,
                self.n_states,
                self.n_actions,
                mdp.horizon(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Lowest-index argmax over one state's action values.
#[inline]
pub fn greedy_action(q_row: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..q_row.len() {
        if q_row[a] > q_row[best] {
            best = a;
        }
    }
    best
}

/// Uniform mixture: one member is drawn per episode and followed throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePolicy {
    members: Vec<PolicyTable>,
}

impl MixturePolicy {
    pub fn new(members: Vec<PolicyTable>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("mixture policy needs at least one member"));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[PolicyTable] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl From<PolicyTable> for MixturePolicy {
    fn from(p: PolicyTable) -> Self {
        Self { members: vec![p] }
    }
}

/// Either kind of executable policy, borrowed.
#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a> {
    Table(&'a PolicyTable),
    Mixture(&'a MixturePolicy),
}

impl<'a> From<&'a PolicyTable> for PolicyRef<'a> {
    fn from(p: &'a PolicyTable) -> Self {
        PolicyRef::Table(p)
    }
}

impl<'a> From<&'a MixturePolicy> for PolicyRef<'a> {
    fn from(p: &'a MixturePolicy) -> Self {
        PolicyRef::Mixture(p)
    }
}

impl<'a> PolicyRef<'a> {
    pub fn members(self) -> &'a [PolicyTable] {
        match self {
            PolicyRef::Table(p) => std::slice::from_ref(p),
            PolicyRef::Mixture(m) => m.members(),
        }
    }
}

/// One sampled trajectory `s_1, a_1, r_1, ..., s_H, a_H, r_H, s_{H+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl EpisodeLog {
    /// Realized return `Σ_h r_h`.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Transitions `(h, s_h, a_h, s_{h+1})`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(move |(h, &a)| (h, self.states[h], a, self.states[h + 1]))
    }
}

/// Draws `s'` from a probability row by inverse CDF.
#[inline]
pub(crate) fn sample_index(row: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Runs one episode of `policy` from the fixed initial state.
///
/// A mixture draws its member once, before the first step.
pub fn sample_episode<'a>(
    mdp: &TabularMdp,
    policy: impl Into<PolicyRef<'a>>,
    episode: usize,
    rng: &mut Rng,
) -> Result<EpisodeLog> {
    let policy = policy.into();
    let members = policy.members();
    let chosen = match policy {
        PolicyRef::Table(p) => p,
        PolicyRef::Mixture(m) => &m.members()[rng.random_range(0..m.len())],
    };
    for m in members {
        m.check_against(mdp)?;
    }
    let hz = mdp.horizon();
    let mut states = Vec::with_capacity(hz + 1);
    let mut actions = Vec::with_capacity(hz);
    let mut rewards = Vec::with_capacity(hz);
    let mut s = mdp.init_state();
    states.push(s);
    for h in 0..hz {
        let a = chosen.action(h, s);
        rewards.push(mdp.reward(s, a));
        actions.push(a);
        s = sample_index(mdp.row(h, s, a), rng);
        states.push(s);
    }
    Ok(EpisodeLog {
        episode,
        states,
        actions,
        rewards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_chain_env;
    use crate::rng;

    #[test]
    fn deterministic_chain_trajectory() {
        let mdp = build_chain_env(4, 2, 5, 0.0).unwrap();
        let right = PolicyTable::constant(&mdp, 1).unwrap();
        let log = sample_episode(&mdp, &right, 1, &mut rng::stream(1, 2)).unwrap();
        assert_eq!(log.states, vec![0, 1, 2, 3, 3, 3]);
        assert_eq!(log.actions, vec![1; 5]);
        for (h, &s) in log.states[..5].iter().enumerate() {
            assert_eq!(log.rewards[h], mdp.reward(s, 1));
        }
        assert!((log.total_reward() - (0.05 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn policy_shape_is_checked() {
        let mdp = build_chain_env(4, 2, 5, 0.0).unwrap();
        let other = build_chain_env(3, 2, 5, 0.0).unwrap();
        let p = PolicyTable::constant(&other, 0).unwrap();
        assert!(matches!(
            sample_episode(&mdp, &p, 0, &mut rng::stream(0, 0)),
            Err(Error::Dimension(_))
        ));
        assert!(PolicyTable::new(1, 2, 2, vec![0, 2]).is_err());
        assert!(MixturePolicy::new(vec![]).is_err());
    }

    #[test]
    fn greedy_breaks_ties_low() {
        assert_eq!(greedy_action(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(greedy_action(&[0.0, 2.0, 2.0]), 1);
    }
}
