use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::linear::LinearMdpSpec;
use super::mdp::{fix_row_sum, TabularMdp};
use crate::error::{Error, Result};
use crate::rng;

/// Slack allowed when checking an MDP against its linear spec.
const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    #[default]
    None,
    /// Every row moves by TV distance at most `zeta_target`.
    Global,
    /// Rows of trap states move by TV distance `delta_tv`; the trap is gated.
    LocalTrap,
}

/// Recipe for turning an exact linear MDP into a misspecified one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecInjector {
    pub mode: InjectionMode,
    pub zeta_target: f64,
    pub delta_tv: f64,
    pub trap_states: Vec<usize>,
    pub reach_prob: f64,
}

impl MisspecInjector {
    pub fn none() -> Self {
        Self {
            mode: InjectionMode::None,
            zeta_target: 0.0,
            delta_tv: 0.0,
            trap_states: Vec::new(),
            reach_prob: 0.0,
        }
    }

    pub fn global(zeta: f64) -> Self {
        Self {
            mode: InjectionMode::Global,
            zeta_target: zeta,
            ..Self::none()
        }
    }

    /// Local trap with the largest admissible gate, `reach_prob = min(1, ζ⁴/Δ⁴)`.
    pub fn local_trap(zeta: f64, delta_tv: f64, trap_states: Vec<usize>) -> Self {
        Self {
            mode: InjectionMode::LocalTrap,
            zeta_target: zeta,
            delta_tv,
            trap_states,
            reach_prob: max_reach_prob(zeta, delta_tv),
        }
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zeta_target) {
            return Err(Error::param(format!("zeta {} outside [0, 1]", self.zeta_target)));
        }
        if self.mode != InjectionMode::LocalTrap {
            return Ok(());
        }
        if !(self.delta_tv > 0.0 && self.delta_tv <= 1.0) {
            return Err(Error::param(format!("delta_tv {} outside (0, 1]", self.delta_tv)));
        }
        if self.trap_states.is_empty() || self.trap_states.iter().any(|&s| s >= n_states) {
            return Err(Error::param("local_trap needs a non-empty set of valid trap states"));
        }
        let cap = max_reach_prob(self.zeta_target, self.delta_tv);
        if !(0.0..=cap * (1.0 + 1e-12)).contains(&self.reach_prob) {
            return Err(Error::param(format!(
                "reach_prob {} exceeds the admissible gate ζ⁴/Δ⁴ = {cap}",
                self.reach_prob
            )));
        }
        Ok(())
    }
}

/// `min(1, (ζ/Δ)⁴)`: with this gate `E[ξ^β] ≤ p Δ^β ≤ ζ^β` for `β ∈ {1,..,4}`.
pub fn max_reach_prob(zeta: f64, delta_tv: f64) -> f64 {
    if delta_tv <= 0.0 {
        return 1.0;
    }
    (zeta / delta_tv).powi(4).min(1.0)
}

/// Builds the environment the agents actually face.
///
/// `mdp` must be exactly represented by `spec`; afterwards `spec` is a
/// misspecified approximation of the returned MDP. Global mode mixes every row
/// with a point mass at a random state, `(1-ζ)p + ζ e_t`. Local-trap mode
/// rewrites only rows leaving trap states, `(1-Δ)p + Δ e_t` with `t` the least
/// likely non-trap successor, and requires every row of `mdp` to put at most
/// `reach_prob` on the trap (see [`gate_region`](super::gate_region)).
/// Rewards are left unchanged.
pub fn inject_misspecification(
    mdp: &TabularMdp,
    spec: &LinearMdpSpec,
    inj: &MisspecInjector,
    seed: u64,
) -> Result<TabularMdp> {
    inj.validate(mdp.n_states())?;
    if inj.mode == InjectionMode::None {
        return Ok(mdp.clone());
    }
    let err = spec.max_kernel_error(mdp)?;
    if err > EXACT_TOL {
        return Err(Error::Construction(format!(
            "MDP is not exactly linear under the given spec (max TV error {err})"
        )));
    }
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut out = mdp.clone();
    match inj.mode {
        InjectionMode::None => unreachable!(),
        InjectionMode::Global => {
            let zeta = inj.zeta_target;
            let mut rng = rng::stream(seed, rng::streams::INJECT);
            for h in 0..hz {
                for s in 0..ns {
                    for a in 0..na {
                        let target = rng.random_range(0..ns);
                        let row = out.row_mut(h, s, a);
                        row.iter_mut().for_each(|p| *p *= 1.0 - zeta);
                        row[target] += zeta;
                        fix_row_sum(row);
                    }
                }
            }
        }
        InjectionMode::LocalTrap => {
            let in_trap: Vec<bool> = (0..ns).map(|s| inj.trap_states.contains(&s)).collect();
            if in_trap[mdp.init_state()] {
                return Err(Error::Construction("initial state lies in the trap region".into()));
            }
            if in_trap.iter().all(|t| *t) {
                return Err(Error::Construction("every state is a trap state".into()));
            }
            for h in 0..hz {
                for s in 0..ns {
                    for a in 0..na {
                        let row = mdp.row(h, s, a);
                        let mass: f64 = (0..ns).filter(|&x| in_trap[x]).map(|x| row[x]).sum();
                        if mass > inj.reach_prob + 1e-12 {
                            return Err(Error::Construction(format!(
                                "row P[{h}][{s}][{a}] puts {mass} on the trap, more than reach_prob {}; gate the region first",
                                inj.reach_prob
                            )));
                        }
                    }
                }
            }
            let delta = inj.delta_tv;
            for h in 0..hz {
                for &s in &inj.trap_states {
                    for a in 0..na {
                        let row = out.row_mut(h, s, a);
                        let mut target = None;
                        for x in (0..ns).filter(|&x| !in_trap[x]) {
                            match target {
                                Some(t) if row[x] >= row[t] => {}
                                _ => target = Some(x),
                            }
                        }
                        let t = target.expect("non-trap state exists");
                        row.iter_mut().for_each(|p| *p *= 1.0 - delta);
                        row[t] += delta;
                        fix_row_sum(row);
                    }
                }
            }
        }
    }
    TabularMdp::new(hz, ns, na, out.transitions().to_vec(), out.rewards().to_vec(), out.init_state())
}
