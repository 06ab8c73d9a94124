use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite episodic MDP with a fixed initial state.
///
/// Steps are zero-based: `h` ranges over `0..horizon`. Transitions may depend on
/// the step, rewards may not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    /// Flattened `[h][s][a][s']`.
    transitions: Vec<f64>,
    /// Flattened `[s][a]`.
    rewards: Vec<f64>,
    init_state: usize,
}

impl TabularMdp {
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        init_state: usize,
    ) -> Result<Self> {
        if horizon == 0 || n_states == 0 || n_actions == 0 {
            return Err(Error::param(format!(
                "H, S, A must be positive (got H={horizon}, S={n_states}, A={n_actions})"
            )));
        }
        if transitions.len() != horizon * n_states * n_actions * n_states {
            return Err(Error::dim(format!(
                "transition tensor has {} entries, expected H*S*A*S = {}",
                transitions.len(),
                horizon * n_states * n_actions * n_states
            )));
        }
        if rewards.len() != n_states * n_actions {
            return Err(Error::dim(format!(
                "reward table has {} entries, expected S*A = {}",
                rewards.len(),
                n_states * n_actions
            )));
        }
        if init_state >= n_states {
            return Err(Error::param(format!("initial state {init_state} out of range")));
        }
        let mdp = Self {
            horizon,
            n_states,
            n_actions,
            transitions,
            rewards,
            init_state,
        };
        mdp.check_invariants()?;
        Ok(mdp)
    }

    fn check_invariants(&self) -> Result<()> {
        for h in 0..self.horizon {
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let row = self.row(h, s, a);
                    if let Some(p) = row.iter().find(|p| !(**p >= 0.0)) {
                        return Err(Error::Construction(format!(
                            "P[{h}][{s}][{a}] has invalid entry {p}"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::Construction(format!(
                            "P[{h}][{s}][{a}] sums to {sum}"
                        )));
                    }
                }
            }
        }
        if let Some(r) = self.rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Construction(format!("reward {r} outside [0, 1]")));
        }
        Ok(())
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

    pub fn init_state(&self) -> usize {
        self.init_state
    }

    #[inline]
    fn row_offset(&self, h: usize, s: usize, a: usize) -> usize {
        ((h * self.n_states + s) * self.n_actions + a) * self.n_states
    }

    /// Next-state distribution `P_h(· | s, a)`.
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let off = self.row_offset(h, s, a);
        &self.transitions[off..off + self.n_states]
    }

    pub(crate) fn row_mut(&mut self, h: usize, s: usize, a: usize) -> &mut [f64] {
        let off = self.row_offset(h, s, a);
        &mut self.transitions[off..off + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// `r(s,a) + Σ_s' P_h(s'|s,a) v(s')`.
    #[inline]
    pub fn backup(&self, h: usize, s: usize, a: usize, v_next: &[f64]) -> f64 {
        self.reward(s, a) + dot(self.row(h, s, a), v_next)
    }

    /// Copy with a different reward table. Used by probes and monotonicity checks.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self> {
        Self::new(
            self.horizon,
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            rewards,
            self.init_state,
        )
    }

    /// Time-augmented copy: state `h * S + s` stands for `s` at step `h`.
    ///
    /// Every augmented state is reachable at exactly one step, so a
    /// step-independent table over the augmented states can represent any
    /// step-dependent Q function of the original MDP.
    pub fn time_augmented(&self) -> Self {
        let (hz, ns, na) = (self.horizon, self.n_states, self.n_actions);
        let big = hz * ns;
        let mut transitions = vec![0.0; hz * big * na * big];
        let mut rewards = vec![0.0; big * na];
        for layer in 0..hz {
            for s in 0..ns {
                let xs = layer * ns + s;
                for a in 0..na {
                    rewards[xs * na + a] = self.reward(s, a);
                }
            }
        }
        for h in 0..hz {
            for layer in 0..hz {
                for s in 0..ns {
                    let xs = layer * ns + s;
                    for a in 0..na {
                        let off = ((h * big + xs) * na + a) * big;
                        let dst = &mut transitions[off..off + big];
                        if layer + 1 < hz {
                            // Layer `layer` moves to `layer + 1` with the kernel of step `layer`.
                            let src = self.row(layer, s, a);
                            dst[(layer + 1) * ns..(layer + 2) * ns].copy_from_slice(src);
                        } else {
                            dst[xs] = 1.0;
                        }
                    }
                }
            }
        }
        Self {
            horizon: hz,
            n_states: big,
            n_actions: na,
            transitions,
            rewards,
            init_state: self.init_state,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Total variation distance `½ Σ |p - q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Uniformly random point of the probability simplex (flat Dirichlet).
pub(crate) fn random_simplex(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.iter_mut().for_each(|x| *x = 1.0 / n as f64);
    }
    fix_row_sum(&mut v);
    v
}

/// Pushes the rounding residue of a probability row onto its largest entry.
pub(crate) fn fix_row_sum(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if let Some(imax) = argmax_first(row) {
        row[imax] += 1.0 - sum;
        if row[imax] < 0.0 {
            row[imax] = 0.0;
        }
    }
}

/// Index of the largest entry; lowest index wins ties.
pub(crate) fn argmax_first(xs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// Riverswim-style chain started at the leftmost state.
///
/// Action 0 moves left deterministically; action 1 moves right with
/// probability `1 - slip` and otherwise stays; any further action stays put.
/// Reward is 1 in the rightmost state, 0.05 in the leftmost, 0 elsewhere.
pub fn build_chain_env(n_states: usize, n_actions: usize, horizon: usize, slip: f64) -> Result<TabularMdp> {
    if n_states < 2 || n_actions < 2 || horizon < 1 {
        return Err(Error::param(format!(
            "chain needs S >= 2, A >= 2, H >= 1 (got S={n_states}, A={n_actions}, H={horizon})"
        )));
    }
    if !(0.0..=0.5).contains(&slip) {
        return Err(Error::param(format!("slip {slip} outside [0, 0.5]")));
    }
    let mut transitions = vec![0.0; horizon * n_states * n_actions * n_states];
    for h in 0..horizon {
        for s in 0..n_states {
            for a in 0..n_actions {
                let off = ((h * n_states + s) * n_actions + a) * n_states;
                let row = &mut transitions[off..off + n_states];
                match a {
                    0 => row[s.saturating_sub(1)] = 1.0,
                    1 => {
                        let right = (s + 1).min(n_states - 1);
                        row[right] += 1.0 - slip;
                        row[s] += slip;
                    }
                    _ => row[s] = 1.0,
                }
            }
        }
    }
    let mut rewards = vec![0.0; n_states * n_actions];
    for a in 0..n_actions {
        rewards[a] = 0.05;
        rewards[(n_states - 1) * n_actions + a] = 1.0;
    }
    TabularMdp::new(horizon, n_states, n_actions, transitions, rewards, 0)
}

/// Dense random MDP: flat-Dirichlet rows, uniform rewards, start in state 0.
pub fn build_random_env(n_states: usize, n_actions: usize, horizon: usize, rng: &mut Rng) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 || horizon == 0 {
        return Err(Error::param("S, A, H must be positive"));
    }
    let mut transitions = Vec::with_capacity(horizon * n_states * n_actions * n_states);
    for _ in 0..horizon * n_states * n_actions {
        transitions.extend(random_simplex(rng, n_states));
    }
    let rewards = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    TabularMdp::new(horizon, n_states, n_actions, transitions, rewards, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn chain_two_states_moves_right() {
        let mdp = build_chain_env(2, 2, 1, 0.0).unwrap();
        assert_eq!(mdp.row(0, 0, 1), &[0.0, 1.0]);
        assert_eq!(mdp.row(0, 1, 0), &[1.0, 0.0]);
    }

    #[test]
    fn chain_rows_are_distributions() {
        let mdp = build_chain_env(5, 2, 10, 0.1).unwrap();
        for h in 0..10 {
            for s in 0..5 {
                for a in 0..2 {
                    let sum: f64 = mdp.row(h, s, a).iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-12);
                }
            }
        }
        assert_eq!(mdp.reward(4, 0), 1.0);
        assert_eq!(mdp.reward(0, 1), 0.05);
        assert_eq!(mdp.reward(2, 1), 0.0);
    }

    #[test]
    fn chain_rejects_bad_parameters() {
        assert!(matches!(build_chain_env(1, 2, 3, 0.0), Err(Error::Param(_))));
        assert!(matches!(build_chain_env(3, 1, 3, 0.0), Err(Error::Param(_))));
        assert!(matches!(build_chain_env(3, 2, 3, 0.7), Err(Error::Param(_))));
    }

    #[test]
    fn new_rejects_bad_rows_and_rewards() {
        let bad_row = TabularMdp::new(1, 2, 1, vec![0.5, 0.6, 1.0, 0.0], vec![0.0, 0.0], 0);
        assert!(matches!(bad_row, Err(Error::Construction(_))));
        let negative = TabularMdp::new(1, 2, 1, vec![1.5, -0.5, 1.0, 0.0], vec![0.0, 0.0], 0);
        assert!(matches!(negative, Err(Error::Construction(_))));
        let bad_reward = TabularMdp::new(1, 1, 1, vec![1.0], vec![1.5], 0);
        assert!(matches!(bad_reward, Err(Error::Construction(_))));
        let bad_shape = TabularMdp::new(1, 2, 1, vec![1.0], vec![0.0, 0.0], 0);
        assert!(matches!(bad_shape, Err(Error::Dimension(_))));
    }

    #[test]
    fn random_env_is_valid_and_seeded() {
        let a = build_random_env(4, 3, 5, &mut rng::stream(9, 0)).unwrap();
        let b = build_random_env(4, 3, 5, &mut rng::stream(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn time_augmented_layers() {
        let mdp = build_chain_env(3, 2, 3, 0.2).unwrap();
        let aug = mdp.time_augmented();
        assert_eq!(aug.n_states(), 9);
        // State 1 in layer 0, action 1 -> layer 1, states 1 or 2.
        let row = aug.row(0, 1, 1);
        assert!((row[3 + 2] - 0.8).abs() < 1e-15);
        assert!((row[3 + 1] - 0.2).abs() < 1e-15);
    }
}
