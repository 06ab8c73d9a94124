//! Empirical check of the locally-bounded misspecification condition.

use rand::Rng as _;

use super::dp::{exact_optimal_values, occupancy_measure, uniform_occupancy};
use super::linear::LinearMdpSpec;
use super::mdp::{tv_distance, TabularMdp};
use super::policy::PolicyTable;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Highest moment order covered by the assumption.
pub const MAX_MOMENT: usize = 4;

/// A policy whose occupancy is probed.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbePolicy {
    Table(PolicyTable),
    /// Every action with equal probability at every step.
    Uniform,
}

/// Per-moment maxima of `E_{d_h^π}[ξ^β]` and `E_{d_h^π}[η^β]` over steps and probes.
///
/// The supremum over *all* policies is not computable in general; these numbers
/// are maxima over the supplied probe set and therefore lower bounds on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Index `β - 1`.
    pub xi_moments: Vec<f64>,
    pub eta_moments: Vec<f64>,
    /// Same moments under the step-averaged occupancy `d^π = (1/H) Σ_h d_h^π`.
    pub xi_moments_averaged: Vec<f64>,
    pub eta_moments_averaged: Vec<f64>,
    pub pointwise_max_xi: f64,
    pub pointwise_max_eta: f64,
    pub n_probes: usize,
}

impl AssumptionReport {
    /// Whether every probed moment satisfies `E[ξ^β] ≤ ζ^β` and `E[η^β] ≤ ζ^β`.
    pub fn within(&self, zeta: f64, tol: f64) -> bool {
        self.xi_moments
            .iter()
            .chain(&self.eta_moments)
            .enumerate()
            .all(|(i, m)| *m <= zeta.powi((i % self.xi_moments.len()) as i32 + 1) + tol)
    }
}

/// Pointwise errors `ξ_h(s,a)` (TV) and `η_h(s,a)` (reward), laid out `[h][s * A + a]`.
pub fn pointwise_errors(mdp: &TabularMdp, spec: &LinearMdpSpec) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    spec.check_shape(mdp)?;
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut xi = vec![vec![0.0; ns * na]; hz];
    let mut eta = vec![vec![0.0; ns * na]; hz];
    for h in 0..hz {
        for s in 0..ns {
            for a in 0..na {
                xi[h][s * na + a] = tv_distance(mdp.row(h, s, a), &spec.induced_row(h, s, a));
                eta[h][s * na + a] = (mdp.reward(s, a) - spec.induced_reward(h, s, a)).abs();
            }
        }
    }
    Ok((xi, eta))
}

pub fn verify_lbm_assumption(
    mdp: &TabularMdp,
    spec: &LinearMdpSpec,
    probes: &[ProbePolicy],
    beta_max: usize,
) -> Result<AssumptionReport> {
    if beta_max == 0 || beta_max > MAX_MOMENT {
        return Err(Error::param(format!("beta_max must be in 1..={MAX_MOMENT}")));
    }
    if probes.is_empty() {
        return Err(Error::param("at least one probe policy is required"));
    }
    let (xi, eta) = pointwise_errors(mdp, spec)?;
    let hz = mdp.horizon();
    let mut report = AssumptionReport {
        xi_moments: vec![0.0; beta_max],
        eta_moments: vec![0.0; beta_max],
        xi_moments_averaged: vec![0.0; beta_max],
        eta_moments_averaged: vec![0.0; beta_max],
        pointwise_max_xi: xi.iter().flatten().fold(0.0, |m, x| m.max(*x)),
        pointwise_max_eta: eta.iter().flatten().fold(0.0, |m, x| m.max(*x)),
        n_probes: probes.len(),
    };
    for probe in probes {
        let occ = match probe {
            ProbePolicy::Table(p) => occupancy_measure(mdp, p)?,
            ProbePolicy::Uniform => uniform_occupancy(mdp),
        };
        for b in 0..beta_max {
            let pow = b as i32 + 1;
            let mut xi_avg = 0.0;
            let mut eta_avg = 0.0;
            for h in 0..hz {
                let xm: f64 = occ[h].iter().zip(&xi[h]).map(|(d, x)| d * x.powi(pow)).sum();
                let em: f64 = occ[h].iter().zip(&eta[h]).map(|(d, x)| d * x.powi(pow)).sum();
                report.xi_moments[b] = report.xi_moments[b].max(xm);
                report.eta_moments[b] = report.eta_moments[b].max(em);
                xi_avg += xm / hz as f64;
                eta_avg += em / hz as f64;
            }
            report.xi_moments_averaged[b] = report.xi_moments_averaged[b].max(xi_avg);
            report.eta_moments_averaged[b] = report.eta_moments_averaged[b].max(eta_avg);
        }
    }
    Ok(report)
}

/// The default probe family: `π*`, the uniform policy, and the greedy policies
/// of `n_perturbed` random reward perturbations of `mdp`.
pub fn standard_probes(mdp: &TabularMdp, n_perturbed: usize, rng: &mut Rng) -> Result<Vec<ProbePolicy>> {
    let mut probes = vec![ProbePolicy::Table(exact_optimal_values(mdp).policy), ProbePolicy::Uniform];
    for _ in 0..n_perturbed {
        let rewards: Vec<f64> = mdp
            .rewards()
            .iter()
            .map(|r| (r + rng.random_range(-0.5..0.5)).clamp(0.0, 1.0))
            .collect();
        let perturbed = mdp.with_rewards(rewards)?;
        probes.push(ProbePolicy::Table(exact_optimal_values(&perturbed).policy));
    }
    Ok(probes)
}

/// For each step `t`, the policy maximizing the probability of standing in
/// `region` at step `t` (exact DP). Adversarial probes for trap instances.
pub fn region_seeking_probes(mdp: &TabularMdp, region: &[usize]) -> Result<Vec<ProbePolicy>> {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut out = Vec::with_capacity(hz);
    for target in 0..hz {
        let mut w: Vec<f64> = (0..ns).map(|s| if region.contains(&s) { 1.0 } else { 0.0 }).collect();
        let mut actions = vec![0; hz * ns];
        for h in (0..target).rev() {
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                let vals: Vec<f64> = (0..na).map(|a| super::mdp::dot(mdp.row(h, s, a), &w)).collect();
                let best = super::policy::greedy_action(&vals);
                actions[h * ns + s] = best;
                next[s] = vals[best];
            }
            w = next;
        }
        out.push(ProbePolicy::Table(PolicyTable::new(hz, ns, na, actions)?));
    }
    Ok(out)
}
