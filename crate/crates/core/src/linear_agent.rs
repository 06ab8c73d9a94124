//! Robust least-squares value iteration with linear features and a known
//! misspecification level.

use nalgebra::{DMatrix, DVector};

use crate::agent::{EpisodePlan, EpisodicAgent};
use crate::env::{greedy_action, EpisodeLog, LinearMdpSpec, PolicyTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLsviConfig {
    pub c_beta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub zeta: f64,
    /// Total number of episodes `K` the run is planned for.
    pub episodes: usize,
}

impl Default for LinearLsviConfig {
    fn default() -> Self {
        Self {
            c_beta: 1.0,
            lambda: 1.0,
            delta: 0.05,
            zeta: 0.0,
            episodes: 1,
        }
    }
}

impl LinearLsviConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_beta > 0.0 && self.c_beta.is_finite()) {
            return Err(Error::param(format!("c_beta must be positive, got {}", self.c_beta)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::param(format!("zeta must lie in [0,1], got {}", self.zeta)));
        }
        if self.episodes == 0 {
            return Err(Error::param("episodes must be at least 1"));
        }
        Ok(())
    }
}

/// `β_k = c_β (4 √(k d) ζ + √((λ+1) d² log(4 d K H / δ))) H`.
pub fn bonus_beta_linear(k: usize, cfg: &LinearLsviConfig, dim: usize, horizon: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("episode index k starts at 1"));
    }
    let d = dim as f64;
    let h = horizon as f64;
    let arg = 4.0 * d * cfg.episodes as f64 * h / cfg.delta;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::param(format!("log argument 4dKH/δ must be positive, got {arg}")));
    }
    let misspec = 4.0 * ((k as f64) * d).sqrt() * cfg.zeta;
    let stat = ((cfg.lambda + 1.0) * d * d * arg.ln()).sqrt();
    Ok(cfg.c_beta * (misspec + stat) * h)
}

/// Per-step regression data: the gram matrix, its maintained inverse and
/// visit statistics.
#[derive(Debug, Clone)]
struct StepData {
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    visits: Vec<usize>,
    reward_sum: Vec<f64>,
    /// `next_counts[pair * S + s']`.
    next_counts: Vec<usize>,
    transitions: Vec<(usize, usize, f64, usize)>,
}

/// Result of one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPass {
    pub beta: f64,
    /// `q[h][s * A + a]`, clipped to `[0, H]`.
    pub q: Vec<Vec<f64>>,
    /// `v[h]` for `h` in `0..=H`.
    pub v: Vec<Vec<f64>>,
    pub weights: Vec<DVector<f64>>,
    pub policy: PolicyTable,
}

/// Robust-LSVI agent state.
#[derive(Debug, Clone)]
pub struct LinearLsviAgent {
    cfg: LinearLsviConfig,
    features: LinearMdpSpec,
    horizon: usize,
    init_state: usize,
    steps: Vec<StepData>,
    episodes_seen: usize,
    last_pass: Option<LinearPass>,
}

impl LinearLsviAgent {
    /// The agent sees the environment only through `features`, the horizon
    /// and the initial state.
    pub fn new(cfg: LinearLsviConfig, features: LinearMdpSpec, horizon: usize, init_state: usize) -> Result<Self> {
        cfg.validate()?;
        if horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if init_state >= features.n_states() {
            return Err(Error::param(format!("initial state {init_state} out of range")));
        }
        let d = features.dim();
        let pairs = features.n_states() * features.n_actions();
        let step = StepData {
            gram: DMatrix::identity(d, d) * cfg.lambda,
            gram_inv: DMatrix::identity(d, d) / cfg.lambda,
            visits: vec![0; pairs],
            reward_sum: vec![0.0; pairs],
            next_counts: vec![0; pairs * features.n_states()],
            transitions: Vec::new(),
        };
        Ok(Self {
            cfg,
            features,
            horizon,
            init_state,
            steps: vec![step; horizon],
            episodes_seen: 0,
            last_pass: None,
        })
    }

    pub fn config(&self) -> &LinearLsviConfig {
        &self.cfg
    }

    pub fn gram(&self, h: usize) -> &DMatrix<f64> {
        &self.steps[h].gram
    }

    /// The incrementally maintained `Λ_h^{-1}`.
    pub fn gram_inverse(&self, h: usize) -> &DMatrix<f64> {
        &self.steps[h].gram_inv
    }

    /// Raw transitions `(s, a, r, s')` stored for step `h`.
    pub fn transitions(&self, h: usize) -> &[(usize, usize, f64, usize)] {
        &self.steps[h].transitions
    }

    pub fn last_pass(&self) -> Option<&LinearPass> {
        self.last_pass.as_ref()
    }

    /// `w_h = Λ_h^{-1} Σ_τ φ(s_τ, a_τ) (r_τ + V_next(s'_τ))`.
    pub fn ridge_weights(&self, h: usize, v_next: &[f64]) -> Result<DVector<f64>> {
        let ns = self.features.n_states();
        if v_next.len() != ns {
            return Err(Error::dim(format!("value table has {} entries, expected {ns}", v_next.len())));
        }
        let step = &self.steps[h];
        let phi = self.features.features();
        let mut b = DVector::zeros(self.features.dim());
        for (pair, &n) in step.visits.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let row = &step.next_counts[pair * ns..(pair + 1) * ns];
            let target: f64 = step.reward_sum[pair]
                + row.iter().zip(v_next).map(|(&c, &v)| c as f64 * v).sum::<f64>();
            b += phi.row(pair).transpose() * target;
        }
        Ok(&step.gram_inv * b)
    }

    /// Optimistic Q tables and greedy policy for the next episode.
    pub fn backward_pass(&self) -> Result<LinearPass> {
        let k = self.episodes_seen + 1;
        let (ns, na) = (self.features.n_states(), self.features.n_actions());
        let hz = self.horizon;
        let cap = hz as f64;
        let beta = bonus_beta_linear(k, &self.cfg, self.features.dim(), hz)?;
        let phi = self.features.features();
        let mut v = vec![vec![0.0; ns]; hz + 1];
        let mut q = vec![vec![0.0; ns * na]; hz];
        let mut weights = vec![DVector::zeros(self.features.dim()); hz];
        for h in (0..hz).rev() {
            let w = self.ridge_weights(h, &v[h + 1])?;
            let inv = &self.steps[h].gram_inv;
            for s in 0..ns {
                for a in 0..na {
                    let pair = s * na + a;
                    let f = phi.row(pair).transpose();
                    let mean = w.dot(&f);
                    let width = f.dot(&(inv * &f)).max(0.0).sqrt();
                    q[h][pair] = (mean + beta * width).clamp(0.0, cap);
                }
                let qs = &q[h][s * na..(s + 1) * na];
                v[h][s] = qs[greedy_action(qs)];
            }
            weights[h] = w;
        }
        let policy = PolicyTable::greedy(&q, ns, na);
        Ok(LinearPass {
            beta,
            q,
            v,
            weights,
            policy,
        })
    }
}

impl EpisodicAgent for LinearLsviAgent {
    fn plan(&mut self) -> Result<EpisodePlan> {
        let pass = self.backward_pass()?;
        let plan = EpisodePlan {
            policy: pass.policy.clone(),
            optimistic_value: Some(pass.v[0][self.init_state]),
        };
        self.last_pass = Some(pass);
        Ok(plan)
    }

    fn observe(&mut self, log: &EpisodeLog) -> Result<()> {
        if log.actions.len() != self.horizon || log.states.len() != self.horizon + 1 {
            return Err(Error::dim("episode length does not match the horizon"));
        }
        let (ns, na) = (self.features.n_states(), self.features.n_actions());
        for (h, s, a, s_next) in log.transitions() {
            if s >= ns || a >= na || s_next >= ns {
                return Err(Error::dim(format!("transition ({s},{a},{s_next}) out of range")));
            }
            let pair = s * na + a;
            let r = log.rewards[h];
            let f = self.features.features().row(pair).transpose();
            let step = &mut self.steps[h];
            step.gram += &f * f.transpose();
            let u = &step.gram_inv * &f;
            let denom = 1.0 + f.dot(&u);
            step.gram_inv -= (&u * u.transpose()) / denom;
            step.visits[pair] += 1;
            step.reward_sum[pair] += r;
            step.next_counts[pair * ns + s_next] += 1;
            step.transitions.push((s, a, r, s_next));
        }
        self.episodes_seen += 1;
        Ok(())
    }

    fn episodes_seen(&self) -> usize {
        self.episodes_seen
    }
}
