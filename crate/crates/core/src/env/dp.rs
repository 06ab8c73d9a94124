//! Exact dynamic programming on a known MDP.

use super::mdp::TabularMdp;
use super::policy::{greedy_action, PolicyRef, PolicyTable};
use crate::error::Result;

/// Optimal value tables from backward induction.
///
/// `v[h]` has `S` entries for `h` in `0..=H` (`v[H]` is all zeros); `q[h]` has
/// `S * A` entries laid out `s * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalValues {
    pub v: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub policy: PolicyTable,
}

impl OptimalValues {
    /// `V*_1(s_init)`.
    pub fn initial_value(&self, mdp: &TabularMdp) -> f64 {
        self.v[0][mdp.init_state()]
    }
}

pub fn exact_optimal_values(mdp: &TabularMdp) -> OptimalValues {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut v = vec![vec![0.0; ns]; hz + 1];
    let mut q = vec![vec![0.0; ns * na]; hz];
    for h in (0..hz).rev() {
        let (head, tail) = v.split_at_mut(h + 1);
        let v_next = &tail[0];
        for s in 0..ns {
            for a in 0..na {
                q[h][s * na + a] = mdp.backup(h, s, a, v_next);
            }
            let qs = &q[h][s * na..(s + 1) * na];
            head[h][s] = qs[greedy_action(qs)];
        }
    }
    let policy = PolicyTable::greedy(&q, ns, na);
    OptimalValues { v, q, policy }
}

/// `V^π_h(s)` for every step, `h` in `0..=H`.
pub fn policy_value_tables(mdp: &TabularMdp, policy: &PolicyTable) -> Result<Vec<Vec<f64>>> {
    policy.check_against(mdp)?;
    let (hz, ns) = (mdp.horizon(), mdp.n_states());
    let mut v = vec![vec![0.0; ns]; hz + 1];
    for h in (0..hz).rev() {
        let (head, tail) = v.split_at_mut(h + 1);
        for s in 0..ns {
            head[h][s] = mdp.backup(h, s, policy.action(h, s), &tail[0]);
        }
    }
    Ok(v)
}

/// Exact `V^π_1(s_init)`. A mixture is worth the mean of its members.
pub fn evaluate_policy<'a>(mdp: &TabularMdp, policy: impl Into<PolicyRef<'a>>) -> Result<f64> {
    let members = policy.into().members();
    let mut total = 0.0;
    for p in members {
        total += policy_value_tables(mdp, p)?[0][mdp.init_state()];
    }
    Ok(total / members.len() as f64)
}

/// State-action occupancy `d_h^π(s, a)` for `h` in `0..H`, laid out `s * A + a`.
pub fn occupancy_measure(mdp: &TabularMdp, policy: &PolicyTable) -> Result<Vec<Vec<f64>>> {
    policy.check_against(mdp)?;
    let na = mdp.n_actions();
    Ok(forward_occupancy(mdp, |h, s, dist| {
        dist.iter_mut().for_each(|x| *x = 0.0);
        dist[policy.action(h, s)] = 1.0;
        debug_assert_eq!(dist.len(), na);
    }))
}

/// Occupancy of the policy that picks every action uniformly at random.
pub fn uniform_occupancy(mdp: &TabularMdp) -> Vec<Vec<f64>> {
    let w = 1.0 / mdp.n_actions() as f64;
    forward_occupancy(mdp, |_, _, dist| dist.iter_mut().for_each(|x| *x = w))
}

fn forward_occupancy(mdp: &TabularMdp, mut action_dist: impl FnMut(usize, usize, &mut [f64])) -> Vec<Vec<f64>> {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut occ = vec![vec![0.0; ns * na]; hz];
    let mut state_dist = vec![0.0; ns];
    state_dist[mdp.init_state()] = 1.0;
    let mut probs = vec![0.0; na];
    for h in 0..hz {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let ps = state_dist[s];
            if ps == 0.0 {
                continue;
            }
            action_dist(h, s, &mut probs);
            for a in 0..na {
                let m = ps * probs[a];
                if m == 0.0 {
                    continue;
                }
                occ[h][s * na + a] += m;
                for (sn, p) in mdp.row(h, s, a).iter().enumerate() {
                    next[sn] += m * p;
                }
            }
        }
        state_dist = next;
    }
    occ
}

/// Step at which each state can first be reached (over all policies), if ever.
pub fn first_reachable_step(mdp: &TabularMdp) -> Vec<Option<usize>> {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut first = vec![None; ns];
    let mut frontier = vec![false; ns];
    frontier[mdp.init_state()] = true;
    for h in 0..hz {
        let mut next = vec![false; ns];
        for s in (0..ns).filter(|&s| frontier[s]) {
            if first[s].is_none() {
                first[s] = Some(h);
            }
            for a in 0..na {
                for (sn, &p) in mdp.row(h, s, a).iter().enumerate() {
                    if p > 0.0 {
                        next[sn] = true;
                    }
                }
            }
        }
        frontier = next;
    }
    first
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_chain_env, build_random_env, TabularMdp};
    use crate::rng;

    #[test]
    fn single_state_accumulates_horizon() {
        let mdp = TabularMdp::new(3, 1, 1, vec![1.0; 3], vec![1.0], 0).unwrap();
        let opt = exact_optimal_values(&mdp);
        assert_eq!(opt.initial_value(&mdp), 3.0);
    }

    #[test]
    fn one_step_picks_better_action() {
        let mdp = TabularMdp::new(1, 1, 2, vec![1.0, 1.0], vec![0.7, 0.3], 0).unwrap();
        let opt = exact_optimal_values(&mdp);
        assert_eq!(opt.initial_value(&mdp), 0.7);
        assert_eq!(opt.policy.action(0, 0), 0);
    }

    #[test]
    fn optimal_policy_evaluates_to_optimal_value() {
        let mdp = build_random_env(5, 3, 6, &mut rng::stream(3, 0)).unwrap();
        let opt = exact_optimal_values(&mdp);
        assert_eq!(evaluate_policy(&mdp, &opt.policy).unwrap(), opt.initial_value(&mdp));
    }

    #[test]
    fn occupancy_is_distribution_and_point_mass_when_deterministic() {
        let mdp = build_chain_env(4, 2, 5, 0.0).unwrap();
        let right = PolicyTable::constant(&mdp, 1).unwrap();
        let occ = occupancy_measure(&mdp, &right).unwrap();
        assert_eq!(occ[0][1], 1.0);
        assert_eq!(occ[2][2 * 2 + 1], 1.0);
        let mdp = build_random_env(4, 2, 5, &mut rng::stream(4, 0)).unwrap();
        let p = PolicyTable::random(&mdp, &mut rng::stream(4, 1));
        for dh in occupancy_measure(&mdp, &p).unwrap() {
            assert!((dh.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for dh in uniform_occupancy(&mdp) {
            assert!((dh.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reachability_of_chain() {
        let mdp = build_chain_env(4, 2, 3, 0.0).unwrap();
        assert_eq!(first_reachable_step(&mdp), vec![Some(0), Some(1), Some(2), None]);
    }
}
