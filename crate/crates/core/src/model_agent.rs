//! Optimistic model selection by value-targeted regression over a finite
//! class of transition kernels.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodePlan, EpisodicAgent};
use crate::env::{dot, exact_optimal_values, EpisodeLog, OptimalValues, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Candidate kernels sharing one known reward table and initial state.
///
/// Member `i` has id `i` and is stored as a full [`TabularMdp`] so that its
/// optimal values can be computed directly.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModelClass {
    members: Vec<TabularMdp>,
}

/// On-disk form of a model class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelClassFile {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub init_state: usize,
    /// `S * A` rewards laid out `s * A + a`.
    pub rewards: Vec<f64>,
    /// One flat `[h][s][a][s']` kernel per member.
    pub kernels: Vec<Vec<f64>>,
}

impl FiniteModelClass {
    /// Every member must match the first in shape, rewards and initial state.
    pub fn new(members: Vec<TabularMdp>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::param("model class must have at least one member"))?;
        for (i, m) in members.iter().enumerate().skip(1) {
            if m.horizon() != first.horizon() || m.n_states() != first.n_states() || m.n_actions() != first.n_actions()
            {
                return Err(Error::dim(format!("member {i} has a different shape from member 0")));
            }
            if m.rewards() != first.rewards() || m.init_state() != first.init_state() {
                return Err(Error::param(format!(
                    "member {i} differs from member 0 in rewards or initial state"
                )));
            }
        }
        Ok(Self { members })
    }

    /// Builds members from raw kernels over `base`'s rewards and initial state.
    pub fn from_kernels(base: &TabularMdp, kernels: Vec<Vec<f64>>) -> Result<Self> {
        let members = kernels
            .into_iter()
            .map(|p| {
                TabularMdp::new(
                    base.horizon(),
                    base.n_states(),
                    base.n_actions(),
                    p,
                    base.rewards().to_vec(),
                    base.init_state(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, id: usize) -> &TabularMdp {
        &self.members[id]
    }

    pub fn members(&self) -> &[TabularMdp] {
        &self.members
    }

    pub fn horizon(&self) -> usize {
        self.members[0].horizon()
    }

    pub fn n_states(&self) -> usize {
        self.members[0].n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.members[0].n_actions()
    }

    pub fn init_state(&self) -> usize {
        self.members[0].init_state()
    }

    pub fn to_file(&self) -> ModelClassFile {
        let m = &self.members[0];
        ModelClassFile {
            horizon: m.horizon(),
            n_states: m.n_states(),
            n_actions: m.n_actions(),
            init_state: m.init_state(),
            rewards: m.rewards().to_vec(),
            kernels: self.members.iter().map(|m| m.transitions().to_vec()).collect(),
        }
    }

    pub fn from_file(file: ModelClassFile) -> Result<Self> {
        let members = file
            .kernels
            .into_iter()
            .map(|p| {
                TabularMdp::new(
                    file.horizon,
                    file.n_states,
                    file.n_actions,
                    p,
                    file.rewards.clone(),
                    file.init_state,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelClassFile =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_file(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// `{truth} ∪ {n_perturbed copies}`; truth has id 0.
    ///
    /// Each copy is a [`perturbed_kernel`] at a weight drawn uniformly from
    /// `[min_tv, max_tv]`, so its rows are within that TV distance of the truth.
    pub fn around_truth(mdp: &TabularMdp, n_perturbed: usize, min_tv: f64, max_tv: f64, rng: &mut Rng) -> Result<Self> {
        let mut members = vec![mdp.clone()];
        for _ in 0..n_perturbed {
            let w = if max_tv > min_tv {
                rng.random_range(min_tv..=max_tv)
            } else {
                min_tv
            };
            members.push(perturbed_kernel(mdp, w, rng)?);
        }
        Self::new(members)
    }
}

/// Mixes every row of `mdp` with a point mass at an independently drawn
/// state, at weight `weight`.
pub fn perturbed_kernel(mdp: &TabularMdp, weight: f64, rng: &mut Rng) -> Result<TabularMdp> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::param(format!("perturbation weight must lie in [0,1], got {weight}")));
    }
    let ns = mdp.n_states();
    let mut p = mdp.transitions().to_vec();
    for row in p.chunks_mut(ns) {
        let target = rng.random_range(0..ns);
        for x in row.iter_mut() {
            *x *= 1.0 - weight;
        }
        row[target] += weight;
        let total: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    TabularMdp::new(
        mdp.horizon(),
        ns,
        mdp.n_actions(),
        p,
        mdp.rewards().to_vec(),
        mdp.init_state(),
    )
}

/// An approximation of `mdp` that spends an error budget `ζ` on making
/// suboptimal actions look better.
///
/// Every row of an action other than `π*_h(s)` is mixed with a point mass at
/// the state of highest `V*_{h+1}` (lowest index on ties) at weight `ζ/H`, so
/// `|(P̄ − P)V| ≤ ζ` for every `V` with values in `[0, H]`.
pub fn biased_kernel(mdp: &TabularMdp, zeta: f64) -> Result<TabularMdp> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::param(format!("zeta must lie in [0,1], got {zeta}")));
    }
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let opt = exact_optimal_values(mdp);
    let weight = zeta / hz as f64;
    let mut p = mdp.transitions().to_vec();
    for h in 0..hz {
        let next = &opt.v[h + 1];
        let best = next
            .iter()
            .enumerate()
            .fold(0, |b, (s, &v)| if v > next[b] { s } else { b });
        for s in 0..ns {
            for a in (0..na).filter(|&a| a != opt.policy.action(h, s)) {
                let off = ((h * ns + s) * na + a) * ns;
                let row = &mut p[off..off + ns];
                for x in row.iter_mut() {
                    *x *= 1.0 - weight;
                }
                row[best] += weight;
            }
        }
    }
    TabularMdp::new(hz, ns, na, p, mdp.rewards().to_vec(), mdp.init_state())
}

/// One past episode: its transitions and the value tables it regressed on.
#[derive(Debug, Clone, PartialEq)]
pub struct VtrEpisode {
    /// `(s_h, a_h, s_{h+1})` for `h` in `0..H`.
    pub transitions: Vec<(usize, usize, usize)>,
    /// `values[h]` is `V_{h+1}` of that episode, so `values[H-1]` is all zeros.
    pub values: Vec<Vec<f64>>,
}

/// Append-only record of past episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtrHistory {
    pub episodes: Vec<VtrEpisode>,
}

impl VtrHistory {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Every regression term `(h, s, a, s', V_{h+1})`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, usize, usize, &[f64])> + '_ {
        self.episodes.iter().flat_map(|ep| {
            ep.transitions
                .iter()
                .enumerate()
                .map(move |(h, &(s, a, s2))| (h, s, a, s2, ep.values[h].as_slice()))
        })
    }

    fn check(&self, p: &TabularMdp) -> Result<()> {
        for ep in &self.episodes {
            if ep.transitions.len() > p.horizon() || ep.values.len() != ep.transitions.len() {
                return Err(Error::dim("history episode does not match the kernel horizon"));
            }
            for (&(s, a, s2), v) in ep.transitions.iter().zip(&ep.values) {
                if s >= p.n_states() || a >= p.n_actions() || s2 >= p.n_states() || v.len() != p.n_states() {
                    return Err(Error::dim("history term does not match the kernel shape"));
                }
            }
        }
        Ok(())
    }
}

/// `Σ_{k'} Σ_h (P V_{h+1}^{k'}(s_h, a_h) − V_{h+1}^{k'}(s_{h+1}))²`.
pub fn vtr_loss(p: &TabularMdp, hist: &VtrHistory) -> Result<f64> {
    hist.check(p)?;
    Ok(hist
        .terms()
        .map(|(h, s, a, s2, v)| {
            let r = dot(p.row(h, s, a), v) - v[s2];
            r * r
        })
        .sum())
}

/// Lowest-id minimizer of [`vtr_loss`].
pub fn vtr_minimizer(class: &FiniteModelClass, hist: &VtrHistory) -> Result<usize> {
    let mut best = 0;
    let mut best_loss = f64::INFINITY;
    for (id, p) in class.members().iter().enumerate() {
        let l = vtr_loss(p, hist)?;
        if l < best_loss {
            best_loss = l;
            best = id;
        }
    }
    Ok(best)
}

/// `d_k(P, Q) = Σ_{k'} Σ_h (P V_{h+1}^{k'}(s_h, a_h) − Q V_{h+1}^{k'}(s_h, a_h))²`.
pub fn model_distance(p: &TabularMdp, q: &TabularMdp, hist: &VtrHistory) -> Result<f64> {
    hist.check(p)?;
    hist.check(q)?;
    Ok(hist
        .terms()
        .map(|(h, s, a, _, v)| {
            let r = dot(p.row(h, s, a), v) - dot(q.row(h, s, a), v);
            r * r
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VtrConfig {
    pub delta: f64,
    pub zeta: f64,
    pub episodes: usize,
    pub c_prime: f64,
    /// Discretization `α`; `None` means `1 / (K H)`.
    pub alpha_cover: Option<f64>,
}

impl Default for VtrConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            zeta: 0.0,
            episodes: 1,
            c_prime: 1.0,
            alpha_cover: None,
        }
    }
}

impl VtrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::param(format!("zeta must lie in [0,1], got {}", self.zeta)));
        }
        if self.episodes == 0 {
            return Err(Error::param("episodes must be at least 1"));
        }
        if !(self.c_prime > 0.0 && self.c_prime.is_finite()) {
            return Err(Error::param(format!("c_prime must be positive, got {}", self.c_prime)));
        }
        if let Some(a) = self.alpha_cover {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::param(format!("alpha_cover must be nonnegative, got {a}")));
            }
        }
        Ok(())
    }

    fn alpha(&self, horizon: usize) -> f64 {
        self.alpha_cover
            .unwrap_or(1.0 / (self.episodes * horizon) as f64)
    }
}

/// `β_k = 3 √(k H) ζ + 5 √(C′ H² log(4 K H N / δ)) + 4 √(α k H²)`.
pub fn radius_beta_vtr(k: usize, cfg: &VtrConfig, class_size: usize, horizon: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("episode index k starts at 1"));
    }
    let h = horizon as f64;
    let kf = k as f64;
    let arg = 4.0 * cfg.episodes as f64 * h * class_size as f64 / cfg.delta;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::param(format!("log argument 4KHN/δ must be positive, got {arg}")));
    }
    let stat = cfg.c_prime * h * h * arg.ln();
    if stat < 0.0 {
        return Err(Error::param("radius is not real: log term is negative"));
    }
    Ok(3.0 * (kf * h).sqrt() * cfg.zeta + 5.0 * stat.sqrt() + 4.0 * (cfg.alpha(horizon) * kf * h * h).sqrt())
}

/// The model chosen for an episode and its optimal-control solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticChoice {
    pub model_id: usize,
    pub center_id: usize,
    /// Ids in the confidence set, ascending.
    pub confidence_set: Vec<usize>,
    pub values: OptimalValues,
}

/// Full-rescan selection: the member of
/// `{P : d_k(P, P̂) ≤ β²}` with the largest optimal initial value.
pub fn optimistic_model(class: &FiniteModelClass, hist: &VtrHistory, beta: f64) -> Result<OptimisticChoice> {
    let center = vtr_minimizer(class, hist)?;
    let mut confidence_set = Vec::new();
    for (id, p) in class.members().iter().enumerate() {
        if id == center || model_distance(p, class.member(center), hist)? <= beta * beta {
            confidence_set.push(id);
        }
    }
    let mut best: Option<(usize, OptimalValues)> = None;
    for &id in &confidence_set {
        let m = class.member(id);
        let vals = exact_optimal_values(m);
        let better = match &best {
            None => true,
            Some((_, b)) => vals.initial_value(m) > b.initial_value(m),
        };
        if better {
            best = Some((id, vals));
        }
    }
    let (model_id, values) = best.ok_or_else(|| Error::Internal("empty confidence set".into()))?;
    Ok(OptimisticChoice {
        model_id,
        center_id: center,
        confidence_set,
        values,
    })
}

/// Robust-UCRL-VTR with incrementally maintained losses and distances.
#[derive(Debug, Clone)]
pub struct UcrlVtrAgent {
    cfg: VtrConfig,
    class: FiniteModelClass,
    solutions: Vec<OptimalValues>,
    history: VtrHistory,
    losses: Vec<f64>,
    /// `dist[i * N + j] = d_k(P_i, P_j)`.
    dist: Vec<f64>,
    pending: Option<OptimisticChoice>,
    last_choice: Option<OptimisticChoice>,
}

impl UcrlVtrAgent {
    pub fn new(cfg: VtrConfig, class: FiniteModelClass) -> Result<Self> {
        cfg.validate()?;
        let n = class.len();
        let solutions = class.members().iter().map(exact_optimal_values).collect();
        Ok(Self {
            cfg,
            solutions,
            history: VtrHistory::default(),
            losses: vec![0.0; n],
            dist: vec![0.0; n * n],
            class,
            pending: None,
            last_choice: None,
        })
    }

    pub fn class(&self) -> &FiniteModelClass {
        &self.class
    }

    pub fn history(&self) -> &VtrHistory {
        &self.history
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.class.len() + j]
    }

    /// The choice behind the most recently observed episode.
    pub fn last_choice(&self) -> Option<&OptimisticChoice> {
        self.last_choice.as_ref()
    }

    /// Selection from the running sums; agrees with [`optimistic_model`].
    pub fn choose(&self) -> Result<OptimisticChoice> {
        let k = self.history.len() + 1;
        let n = self.class.len();
        let beta = radius_beta_vtr(k, &self.cfg, n, self.class.horizon())?;
        let mut center = 0;
        for id in 1..n {
            if self.losses[id] < self.losses[center] {
                center = id;
            }
        }
        let confidence_set: Vec<usize> = (0..n)
            .filter(|&id| id == center || self.dist[id * n + center] <= beta * beta)
            .collect();
        let s0 = self.class.init_state();
        let mut model_id = confidence_set[0];
        for &id in &confidence_set[1..] {
            if self.solutions[id].v[0][s0] > self.solutions[model_id].v[0][s0] {
                model_id = id;
            }
        }
        Ok(OptimisticChoice {
            model_id,
            center_id: center,
            confidence_set,
            values: self.solutions[model_id].clone(),
        })
    }
}

impl EpisodicAgent for UcrlVtrAgent {
    fn plan(&mut self) -> Result<EpisodePlan> {
        let choice = self.choose()?;
        let plan = EpisodePlan {
            policy: choice.values.policy.clone(),
            optimistic_value: Some(choice.values.v[0][self.class.init_state()]),
        };
        self.pending = Some(choice);
        Ok(plan)
    }

    fn observe(&mut self, log: &EpisodeLog) -> Result<()> {
        let hz = self.class.horizon();
        if log.actions.len() != hz || log.states.len() != hz + 1 {
            return Err(Error::dim("episode length does not match the horizon"));
        }
        let choice = match self.pending.take() {
            Some(c) => c,
            None => self.choose()?,
        };
        let (ns, na) = (self.class.n_states(), self.class.n_actions());
        let n = self.class.len();
        let values: Vec<Vec<f64>> = (1..=hz).map(|h| choice.values.v[h].clone()).collect();
        let mut transitions = Vec::with_capacity(hz);
        let mut preds = vec![0.0; n];
        for (h, s, a, s2) in log.transitions() {
            if s >= ns || a >= na || s2 >= ns {
                return Err(Error::dim(format!("transition ({s},{a},{s2}) out of range")));
            }
            let v = &values[h];
            for (id, p) in self.class.members().iter().enumerate() {
                preds[id] = dot(p.row(h, s, a), v);
                let r = preds[id] - v[s2];
                self.losses[id] += r * r;
            }
            for i in 0..n {
                for j in i + 1..n {
                    let g = preds[i] - preds[j];
                    self.dist[i * n + j] += g * g;
                    self.dist[j * n + i] = self.dist[i * n + j];
                }
            }
            transitions.push((s, a, s2));
        }
        self.history.episodes.push(VtrEpisode { transitions, values });
        self.last_choice = Some(choice);
        Ok(())
    }

    fn episodes_seen(&self) -> usize {
        self.history.len()
    }
}
