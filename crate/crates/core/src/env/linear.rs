use nalgebra::{DMatrix, DVector};

use super::mdp::{build_random_env, random_simplex, tv_distance, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;

/// Linear representation of an episodic MDP: `P_h(s'|s,a) ≈ ⟨φ(s,a), μ_h(s')⟩`
/// and `r(s,a) ≈ ⟨φ(s,a), θ_h⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMdpSpec {
    dim: usize,
    n_states: usize,
    n_actions: usize,
    /// Row `s * A + a` is `φ(s, a)`.
    phi: DMatrix<f64>,
    /// `mu[h]` is `d × S`; row `i` is the measure `μ_h^{(i)}`.
    mu: Vec<DMatrix<f64>>,
    theta: Vec<DVector<f64>>,
}

impl LinearMdpSpec {
    pub fn new(phi: DMatrix<f64>, mu: Vec<DMatrix<f64>>, theta: Vec<DVector<f64>>, n_states: usize, n_actions: usize) -> Result<Self> {
        let dim = phi.ncols();
        if phi.nrows() != n_states * n_actions {
            return Err(Error::dim(format!("φ has {} rows, expected S*A = {}", phi.nrows(), n_states * n_actions)));
        }
        if mu.is_empty() || mu.len() != theta.len() {
            return Err(Error::dim("μ and θ need one entry per step"));
        }
        if mu.iter().any(|m| m.nrows() != dim || m.ncols() != n_states) || theta.iter().any(|t| t.len() != dim) {
            return Err(Error::dim(format!("μ_h must be {dim}×{n_states} and θ_h of length {dim}")));
        }
        let spec = Self {
            dim,
            n_states,
            n_actions,
            phi,
            mu,
            theta,
        };
        spec.check_bounds()?;
        Ok(spec)
    }

    /// Norm bounds `‖φ‖ ≤ 1`, `‖θ_h‖ ≤ √d`, `‖μ_h(S)‖ ≤ √d`.
    fn check_bounds(&self) -> Result<()> {
        let root_d = (self.dim as f64).sqrt() + 1e-12;
        for (i, row) in self.phi.row_iter().enumerate() {
            if row.norm() > 1.0 + 1e-12 {
                return Err(Error::Construction(format!("‖φ‖ = {} > 1 at pair {i}", row.norm())));
            }
        }
        for (h, (m, t)) in self.mu.iter().zip(&self.theta).enumerate() {
            if t.norm() > root_d {
                return Err(Error::Construction(format!("‖θ_{h}‖ = {} > √d", t.norm())));
            }
            let mass: DVector<f64> = m.column_sum();
            if mass.norm() > root_d {
                return Err(Error::Construction(format!("‖μ_{h}(S)‖ = {} > √d", mass.norm())));
            }
        }
        Ok(())
    }

    /// Exact one-hot representation of a tabular MDP (`d = S·A`).
    pub fn one_hot(mdp: &TabularMdp) -> Self {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let d = ns * na;
        let phi = DMatrix::identity(d, d);
        let mu = (0..mdp.horizon())
            .map(|h| DMatrix::from_fn(d, ns, |i, sn| mdp.row(h, i / na, i % na)[sn]))
            .collect();
        let theta = (0..mdp.horizon()).map(|_| DVector::from_column_slice(mdp.rewards())).collect();
        Self {
            dim: d,
            n_states: ns,
            n_actions: na,
            phi,
            mu,
            theta,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.mu.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Feature matrix, one row per `(s, a)` pair in `s * A + a` order.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn feature(&self, s: usize, a: usize) -> DVector<f64> {
        self.phi.row(s * self.n_actions + a).transpose()
    }

    pub fn mu(&self, h: usize) -> &DMatrix<f64> {
        &self.mu[h]
    }

    pub fn theta(&self, h: usize) -> &DVector<f64> {
        &self.theta[h]
    }

    /// `⟨φ(s,a), μ_h(·)⟩` as a row over next states.
    pub fn induced_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        let phi = self.phi.row(s * self.n_actions + a);
        (phi * &self.mu[h]).iter().copied().collect()
    }

    /// `⟨φ(s,a), θ_h⟩`.
    pub fn induced_reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.phi.row(s * self.n_actions + a).dot(&self.theta[h].transpose())
    }

    /// The MDP whose kernel and rewards are exactly the linear ones (rewards from `θ_1`).
    pub fn to_mdp(&self, init_state: usize) -> Result<TabularMdp> {
        let (ns, na, hz) = (self.n_states, self.n_actions, self.horizon());
        let mut transitions = Vec::with_capacity(hz * ns * na * ns);
        for h in 0..hz {
            for s in 0..ns {
                for a in 0..na {
                    transitions.extend(self.induced_row(h, s, a));
                }
            }
        }
        let rewards = (0..ns * na)
            .map(|i| self.induced_reward(0, i / na, i % na).clamp(0.0, 1.0))
            .collect();
        TabularMdp::new(hz, ns, na, transitions, rewards, init_state)
    }

    /// Largest `TV(P_h(·|s,a), ⟨φ(s,a), μ_h⟩)` over all `(h, s, a)`.
    pub fn max_kernel_error(&self, mdp: &TabularMdp) -> Result<f64> {
        self.check_shape(mdp)?;
        let mut worst: f64 = 0.0;
        for h in 0..mdp.horizon() {
            for s in 0..mdp.n_states() {
                for a in 0..mdp.n_actions() {
                    worst = worst.max(tv_distance(mdp.row(h, s, a), &self.induced_row(h, s, a)));
                }
            }
        }
        Ok(worst)
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.horizon() != mdp.horizon() || self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::dim(format!(
                "linear spec (H={}, S={}, A={}) does not match MDP (H={}, S={}, A={})",
                self.horizon(),
                self.n_states,
                self.n_actions,
                mdp.horizon(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    fn features_on_simplex(&self) -> bool {
        self.phi.row_iter().all(|r| r.iter().all(|x| *x >= 0.0) && (r.sum() - 1.0).abs() <= 1e-12)
    }
}

/// Exact linear MDP with `d`-dimensional features.
///
/// Features are points of the probability simplex and each `μ_h^{(i)}` is a
/// distribution, so every induced row is a mixture of `d` base distributions.
/// With `d = S·A` the features are one-hot over a random tabular MDP.
pub fn build_linear_env(
    dim: usize,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    rng: &mut Rng,
) -> Result<(TabularMdp, LinearMdpSpec)> {
    if dim == 0 || n_states == 0 || n_actions == 0 || horizon == 0 {
        return Err(Error::param("d, S, A, H must be positive"));
    }
    if dim > n_states * n_actions {
        return Err(Error::param(format!("d = {dim} exceeds S*A = {}", n_states * n_actions)));
    }
    if dim == n_states * n_actions {
        let mdp = build_random_env(n_states, n_actions, horizon, rng)?;
        let spec = LinearMdpSpec::one_hot(&mdp);
        return Ok((mdp, spec));
    }
    let pairs = n_states * n_actions;
    let mut phi = DMatrix::zeros(pairs, dim);
    for i in 0..pairs {
        // The first `d` pairs pin down each basis direction.
        let row = if i < dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        } else {
            random_simplex(rng, dim)
        };
        phi.row_mut(i).copy_from(&DVector::from_vec(row).transpose());
    }
    let mut mu = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut m = DMatrix::zeros(dim, n_states);
        for i in 0..dim {
            m.row_mut(i).copy_from(&DVector::from_vec(random_simplex(rng, n_states)).transpose());
        }
        mu.push(m);
    }
    let theta_vec = DVector::from_fn(dim, |_, _| rng.random::<f64>());
    let theta = vec![theta_vec; horizon];
    let spec = LinearMdpSpec::new(phi, mu, theta, n_states, n_actions)?;
    let mdp = spec.to_mdp(0)?;
    Ok((mdp, spec))
}

/// Reshapes an exact linear spec so that a trap region is hard to enter.
///
/// Each base measure `μ_h^{(i)}` is capped at `reach_prob` total mass on
/// `trap_states`; if `exit_state` is given its mass is removed entirely, so the
/// exit is only entered from the trap region. Removed mass goes to the other
/// states in proportion to their current mass. Features must lie on the
/// simplex, so every induced row then puts at most `reach_prob` on the trap.
pub fn gate_region(
    spec: &LinearMdpSpec,
    trap_states: &[usize],
    exit_state: Option<usize>,
    reach_prob: f64,
) -> Result<LinearMdpSpec> {
    let ns = spec.n_states();
    if !(0.0..=1.0).contains(&reach_prob) {
        return Err(Error::param(format!("reach_prob {reach_prob} outside [0, 1]")));
    }
    if trap_states.is_empty() || trap_states.iter().any(|&s| s >= ns) {
        return Err(Error::param("trap states must be a non-empty set of valid state indices"));
    }
    if let Some(x) = exit_state {
        if x >= ns || trap_states.contains(&x) {
            return Err(Error::param(format!("exit state {x} must be a valid non-trap state")));
        }
    }
    if !spec.features_on_simplex() {
        return Err(Error::Construction("gating needs features on the probability simplex".into()));
    }
    let in_trap: Vec<bool> = (0..ns).map(|s| trap_states.contains(&s)).collect();
    let receivers: Vec<usize> = (0..ns).filter(|&s| !in_trap[s] && Some(s) != exit_state).collect();
    if receivers.is_empty() {
        return Err(Error::Construction("no state left to absorb the gated mass".into()));
    }
    let mut gated = spec.clone();
    for m in gated.mu.iter_mut() {
        for i in 0..m.nrows() {
            let mut row: Vec<f64> = m.row(i).iter().copied().collect();
            let trap_mass: f64 = (0..ns).filter(|&s| in_trap[s]).map(|s| row[s]).sum();
            let mut excess = 0.0;
            if trap_mass > reach_prob {
                let scale = reach_prob / trap_mass;
                for s in (0..ns).filter(|&s| in_trap[s]) {
                    excess += row[s] * (1.0 - scale);
                    row[s] *= scale;
                }
            }
            if let Some(x) = exit_state {
                excess += row[x];
                row[x] = 0.0;
            }
            if excess > 0.0 {
                let base: f64 = receivers.iter().map(|&s| row[s]).sum();
                for &s in &receivers {
                    row[s] += if base > 0.0 {
                        excess * row[s] / base
                    } else {
                        excess / receivers.len() as f64
                    };
                }
            }
            fix_row_sum_within(&mut row, &receivers);
            m.row_mut(i).copy_from(&DVector::from_vec(row).transpose());
        }
    }
    Ok(gated)
}

/// Like `fix_row_sum` but only touches the given entries.
fn fix_row_sum_within(row: &mut [f64], allowed: &[usize]) {
    let residual = 1.0 - row.iter().sum::<f64>();
    let mut best = allowed[0];
    for &s in allowed {
        if row[s] > row[best] {
            best = s;
        }
    }
    row[best] = (row[best] + residual).max(0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn one_hot_reconstructs_kernel() {
        let (mdp, spec) = build_linear_env(8, 4, 2, 3, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(spec.dim(), 8);
        for h in 0..3 {
            for s in 0..4 {
                for a in 0..2 {
                    let row = spec.induced_row(h, s, a);
                    for (x, y) in row.iter().zip(mdp.row(h, s, a)) {
                        assert!((x - y).abs() <= 1e-12);
                    }
                    assert!((spec.induced_reward(h, s, a) - mdp.reward(s, a)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn low_rank_rows_sum_to_one() {
        let (mdp, spec) = build_linear_env(3, 4, 2, 2, &mut rng::stream(7, 0)).unwrap();
        for h in 0..2 {
            for s in 0..4 {
                for a in 0..2 {
                    let row = spec.induced_row(h, s, a);
                    assert!(row.iter().all(|p| *p >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                }
            }
        }
        assert!(spec.max_kernel_error(&mdp).unwrap() <= 1e-10);
    }

    #[test]
    fn rejects_oversized_dimension() {
        assert!(matches!(
            build_linear_env(9, 4, 2, 2, &mut rng::stream(0, 0)),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn gating_caps_trap_mass_and_empties_exit() {
        let (_, spec) = build_linear_env(3, 6, 2, 3, &mut rng::stream(5, 0)).unwrap();
        let gated = gate_region(&spec, &[4], Some(5), 0.01).unwrap();
        let mdp = gated.to_mdp(0).unwrap();
        for h in 0..3 {
            for s in 0..6 {
                for a in 0..2 {
                    let row = mdp.row(h, s, a);
                    assert!(row[4] <= 0.01 + 1e-12);
                    assert_eq!(row[5], 0.0);
                }
            }
        }
    }
}
