#![allow(dead_code)]

use rand::Rng as _;
use robust_rl::env::{evaluate_policy, sample_episode, PolicyTable, TabularMdp};
use robust_rl::rng::Rng;

/// Every deterministic nonstationary policy of `mdp`.
pub fn all_policies(mdp: &TabularMdp) -> Vec<PolicyTable> {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let cells = hz * ns;
    let total = na.pow(cells as u32);
    (0..total)
        .map(|mut code| {
            let actions = (0..cells)
                .map(|_| {
                    let a = code % na;
                    code /= na;
                    a
                })
                .collect();
            PolicyTable::new(hz, ns, na, actions).unwrap()
        })
        .collect()
}

/// Best value over all deterministic policies.
pub fn enumerated_optimum(mdp: &TabularMdp) -> f64 {
    all_policies(mdp)
        .iter()
        .map(|p| evaluate_policy(mdp, p).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Mean return and its standard error over `n` sampled episodes.
pub fn monte_carlo_value(mdp: &TabularMdp, policy: &PolicyTable, n: usize, rng: &mut Rng) -> (f64, f64) {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for k in 0..n {
        let r = sample_episode(mdp, policy, k + 1, rng).unwrap().total_reward();
        sum += r;
        sum_sq += r * r;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0) * n as f64 / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn pair_norm(f: &[f64], g: &[f64], mask: usize) -> f64 {
    let mut s = 0.0;
    for (z, (a, b)) in f.iter().zip(g).enumerate() {
        if mask & (1 << z) != 0 {
            s += (a - b) * (a - b);
        }
    }
    s.sqrt()
}

fn independent_of_set(values: &[Vec<f64>], x: usize, mask: usize, eps: f64) -> bool {
    for i in 0..values.len() {
        for j in 0..values.len() {
            if i != j && pair_norm(&values[i], &values[j], mask) <= eps && (values[i][x] - values[j][x]).abs() > eps {
                return true;
            }
        }
    }
    false
}

/// Longest sequence of distinct points, each `eps`-independent of the set of
/// its predecessors, for one fixed `eps`.
fn longest_at(values: &[Vec<f64>], n: usize, eps: f64) -> usize {
    let subsets = 1usize << n;
    let mut best = vec![0usize; subsets];
    for mask in (0..subsets).rev() {
        for x in 0..n {
            if mask & (1 << x) == 0 && independent_of_set(values, x, mask, eps) {
                best[mask] = best[mask].max(1 + best[mask | (1 << x)]);
            }
        }
    }
    best[0]
}

/// Eluder dimension by scanning every candidate `ε' ≥ ε`: `ε` itself and
/// every pair norm over every subset of the domain.
pub fn brute_force_eluder(values: &[Vec<f64>], eps: f64) -> usize {
    let n = values.first().map_or(0, Vec::len);
    let mut candidates = vec![eps];
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            for mask in 0..(1usize << n) {
                let d = pair_norm(&values[i], &values[j], mask);
                if d >= eps {
                    candidates.push(d);
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    candidates.iter().map(|&e| longest_at(values, n, e)).max().unwrap_or(0)
}

/// A random class on a quarter grid, so pair norms are computed exactly.
pub fn grid_class(m: usize, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0..=8) as f64 * 0.25).collect())
        .collect()
}
