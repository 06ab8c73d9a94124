//! Robust least-squares value iteration over a finite, enumerable function
//! class with a width-function bonus.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;

use crate::agent::{EpisodePlan, EpisodicAgent};
use crate::env::{exact_optimal_values, greedy_action, uniform_occupancy, EpisodeLog, PolicyTable, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A finite class of step-independent tables `f: S × A → [0, H+1]`.
///
/// Member `i` has id `i`; entries are laid out `s * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFunctionClass {
    n_states: usize,
    n_actions: usize,
    members: Vec<Vec<f64>>,
}

impl FiniteFunctionClass {
    /// Checks shapes and that every value lies in `[0, horizon + 1]`.
    pub fn new(n_states: usize, n_actions: usize, horizon: usize, members: Vec<Vec<f64>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("function class must have at least one member"));
        }
        let cap = horizon as f64 + 1.0;
        for (i, m) in members.iter().enumerate() {
            if m.len() != n_states * n_actions {
                return Err(Error::dim(format!(
                    "member {i} has {} entries, expected {}",
                    m.len(),
                    n_states * n_actions
                )));
            }
            if let Some(x) = m.iter().find(|x| !(0.0..=cap).contains(*x)) {
                return Err(Error::param(format!("member {i} has value {x} outside [0, {cap}]")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn member(&self, id: usize) -> &[f64] {
        &self.members[id]
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn value(&self, id: usize, s: usize, a: usize) -> f64 {
        self.members[id][s * self.n_actions + a]
    }

    /// Parses the text format: a header line `S A`, then one member per line
    /// with `S * A` whitespace-separated values. `#` starts a comment.
    pub fn parse(text: &str, horizon: usize) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::Config("function class file is empty".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("line {line_no}: bad header `{header}`: {e}")))?;
        let [ns, na] = dims[..] else {
            return Err(Error::Config(format!("line {line_no}: header must be `S A`")));
        };
        let mut members = Vec::new();
        for (line_no, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("line {line_no}: {e}")))?;
            if row.len() != ns * na {
                return Err(Error::Config(format!(
                    "line {line_no}: expected {} values, found {}",
                    ns * na,
                    row.len()
                )));
            }
            members.push(row);
        }
        Self::new(ns, na, horizon, members).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_states, self.n_actions);
        for m in &self.members {
            let line: Vec<String> = m.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn load(path: &Path, horizon: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, horizon)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// `{Q*} ∪ {n_perturbed noisy copies}` for a layered `mdp`.
    ///
    /// Copies add independent uniform noise in `[-scale, scale]` to every
    /// entry, clipped to `[0, H+1]`. The optimal table has id 0.
    pub fn around_optimal(mdp: &TabularMdp, n_perturbed: usize, scale: f64, rng: &mut Rng) -> Result<Self> {
        if !(scale >= 0.0) {
            return Err(Error::param(format!("perturbation scale must be nonnegative, got {scale}")));
        }
        let q_star = stationary_optimal_q(mdp)?;
        let cap = mdp.horizon() as f64 + 1.0;
        let mut members = vec![q_star.clone()];
        for _ in 0..n_perturbed {
            members.push(
                q_star
                    .iter()
                    .map(|&q| (q + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, cap))
                    .collect(),
            );
        }
        Self::new(mdp.n_states(), mdp.n_actions(), mdp.horizon(), members)
    }

    /// Product class over the layers of a time-augmented `mdp`.
    ///
    /// States `l * S .. (l + 1) * S` form layer `l`. Each layer gets the
    /// optimal block plus `n_perturbed` noisy copies of it, and the members
    /// are all `(n_perturbed + 1)^H` combinations, so the pooled regression
    /// can fit every layer separately. The optimal table has id 0.
    pub fn layered_around_optimal(mdp: &TabularMdp, n_perturbed: usize, scale: f64, rng: &mut Rng) -> Result<Self> {
        if !(scale >= 0.0) {
            return Err(Error::param(format!("perturbation scale must be nonnegative, got {scale}")));
        }
        let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
        if ns % hz != 0 {
            return Err(Error::Construction(format!(
                "{ns} states do not split into {hz} layers; expected a time-augmented MDP"
            )));
        }
        let per = n_perturbed + 1;
        let total = (per as u64)
            .checked_pow(hz as u32)
            .filter(|&t| t <= MAX_LAYERED_MEMBERS)
            .ok_or_else(|| {
                Error::param(format!("{per}^{hz} members exceed the limit of {MAX_LAYERED_MEMBERS}"))
            })? as usize;
        let q_star = stationary_optimal_q(mdp)?;
        let cap = hz as f64 + 1.0;
        let block = ns / hz * na;
        let mut layers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(hz);
        for l in 0..hz {
            let opt = &q_star[l * block..(l + 1) * block];
            let mut options = vec![opt.to_vec()];
            for _ in 0..n_perturbed {
                options.push(
                    opt.iter()
                        .map(|&q| (q + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, cap))
                        .collect(),
                );
            }
            layers.push(options);
        }
        let members = (0..total)
            .map(|mut code| {
                let mut m = Vec::with_capacity(ns * na);
                for options in &layers {
                    m.extend_from_slice(&options[code % per]);
                    code /= per;
                }
                m
            })
            .collect();
        Self::new(ns, na, hz, members)
    }
}

/// Size cap for [`FiniteFunctionClass::layered_around_optimal`].
pub const MAX_LAYERED_MEMBERS: u64 = 100_000;

/// A single table holding `Q*_h(s, ·)` at every step `h` where `s` is reachable.
///
/// Fails when some state is reachable at two steps with different optimal
/// values; [`TabularMdp::time_augmented`] removes that obstruction.
pub fn stationary_optimal_q(mdp: &TabularMdp) -> Result<Vec<f64>> {
    let opt = exact_optimal_values(mdp);
    let occ = uniform_occupancy(mdp);
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut table: Vec<Option<f64>> = vec![None; ns * na];
    for (h, occ_h) in occ.iter().enumerate() {
        for s in 0..ns {
            if occ_h[s * na..(s + 1) * na].iter().all(|&d| d <= 0.0) {
                continue;
            }
            for a in 0..na {
                let q = opt.q[h][s * na + a];
                match table[s * na + a] {
                    None => table[s * na + a] = Some(q),
                    Some(prev) if prev == q => {}
                    Some(_) => {
                        return Err(Error::Construction(format!(
                            "state {s} is reachable at several steps with different optimal values; \
                             use a time-augmented MDP"
                        )))
                    }
                }
            }
        }
    }
    Ok(table
        .iter()
        .enumerate()
        .map(|(i, q)| q.unwrap_or(opt.q[0][i]))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralLsviConfig {
    pub delta: f64,
    pub zeta: f64,
    pub episodes: usize,
    pub c_prime: f64,
    /// Discretization scale `T`; `None` means `K * H`.
    pub cover_t: Option<f64>,
    pub log_w: f64,
    pub subsample: bool,
}

impl Default for GeneralLsviConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            zeta: 0.0,
            episodes: 1,
            c_prime: 1.0,
            cover_t: None,
            log_w: 0.0,
            subsample: false,
        }
    }
}

impl GeneralLsviConfig {
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
        if let Some(t) = self.cover_t {
            if !(t >= 1.0) {
                return Err(Error::param(format!("cover_t must be at least 1, got {t}")));
            }
        }
        if !self.log_w.is_finite() {
            return Err(Error::param("log_w must be finite"));
        }
        Ok(())
    }

    fn cover_scale(&self, horizon: usize) -> f64 {
        self.cover_t.unwrap_or((self.episodes * horizon) as f64)
    }
}

/// `β = C′ √(k H ζ² + H² (log(4T²/δ) + 2 log M + log_w + 1))`.
pub fn radius_beta_general(k: usize, cfg: &GeneralLsviConfig, class_size: usize, horizon: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("episode index k starts at 1"));
    }
    if class_size == 0 {
        return Err(Error::param("class size must be at least 1"));
    }
    let t = cfg.cover_scale(horizon);
    let arg = 4.0 * t * t / cfg.delta;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::param(format!("log argument 4T²/δ must be positive, got {arg}")));
    }
    let h = horizon as f64;
    let logs = arg.ln() + 2.0 * (class_size as f64).ln() + cfg.log_w + 1.0;
    let inner = k as f64 * h * cfg.zeta * cfg.zeta + h * h * logs;
    if inner < 0.0 {
        return Err(Error::param("radius is not real: log terms are too negative"));
    }
    Ok(cfg.c_prime * inner.sqrt())
}

/// Lowest-id minimizer of `Σ (f(s,a) − q)²` over an explicit dataset.
pub fn empirical_minimizer(class: &FiniteFunctionClass, data: &[(usize, usize, f64)]) -> Result<usize> {
    let mut fit = PairMoments::new(class.n_states() * class.n_actions());
    for &(s, a, q) in data {
        if s >= class.n_states() || a >= class.n_actions() {
            return Err(Error::dim(format!("data point ({s},{a}) outside the class domain")));
        }
        if !q.is_finite() {
            return Err(Error::param("regression target is not finite"));
        }
        fit.add(s * class.n_actions() + a, 1.0, q, q * q);
    }
    Ok(fit.minimizer(class))
}

/// Sufficient statistics for squared loss: per pair `n`, `Σq`, `Σq²`.
#[derive(Debug, Clone)]
struct PairMoments {
    n: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl PairMoments {
    fn new(pairs: usize) -> Self {
        Self {
            n: vec![0.0; pairs],
            sum: vec![0.0; pairs],
            sum_sq: vec![0.0; pairs],
        }
    }

    fn add(&mut self, pair: usize, n: f64, sum: f64, sum_sq: f64) {
        self.n[pair] += n;
        self.sum[pair] += sum;
        self.sum_sq[pair] += sum_sq;
    }

    fn loss(&self, f: &[f64]) -> f64 {
        let mut total = 0.0;
        for (pair, &n) in self.n.iter().enumerate() {
            if n > 0.0 {
                let x = f[pair];
                total += n * x * x - 2.0 * x * self.sum[pair] + self.sum_sq[pair];
            }
        }
        total
    }

    fn minimizer(&self, class: &FiniteFunctionClass) -> usize {
        let mut best = 0;
        let mut best_loss = f64::INFINITY;
        for (id, f) in class.members().iter().enumerate() {
            let l = self.loss(f);
            if l < best_loss {
                best_loss = l;
                best = id;
            }
        }
        best
    }
}

/// `‖f − g‖_Z` with per-pair weights (visit counts or importance weights).
pub fn weighted_distance(f: &[f64], g: &[f64], weights: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(weights)
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Members within `radius` of `center` in the weighted dataset norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    pub center: usize,
    pub radius: f64,
    pub member_ids: Vec<usize>,
}

impl ConfidenceRegion {
    pub fn new(class: &FiniteFunctionClass, center: usize, weights: &[f64], radius: f64) -> Result<Self> {
        if center >= class.len() {
            return Err(Error::param(format!("center id {center} out of range")));
        }
        if weights.len() != class.n_states() * class.n_actions() {
            return Err(Error::dim("weights do not cover the class domain"));
        }
        let c = class.member(center);
        let member_ids: Vec<usize> = (0..class.len())
            .filter(|&id| id == center || weighted_distance(class.member(id), c, weights) <= radius)
            .collect();
        Ok(Self {
            center,
            radius,
            member_ids,
        })
    }
}

/// `max_f f(s,a) − min_f f(s,a)` over the region's members.
pub fn width_bonus(region: &ConfidenceRegion, class: &FiniteFunctionClass, s: usize, a: usize) -> f64 {
    let (lo, hi) = region
        .member_ids
        .iter()
        .map(|&id| class.value(id, s, a))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    (hi - lo).max(0.0)
}

/// Per-pair sensitivity `max_{f₁,f₂} (f₁ − f₂)²(z) / max(‖f₁ − f₂‖²_Z, 1)`.
pub fn sensitivities(class: &FiniteFunctionClass, counts: &[f64]) -> Vec<f64> {
    let m = class.len();
    let mut sens = vec![0.0f64; counts.len()];
    for i in 0..m {
        for j in i + 1..m {
            let (fi, fj) = (class.member(i), class.member(j));
            let norm_sq = weighted_distance(fi, fj, counts).powi(2).max(1.0);
            for (pair, s) in sens.iter_mut().enumerate() {
                let gap = fi[pair] - fj[pair];
                *s = (*s).max(gap * gap / norm_sq);
            }
        }
    }
    sens
}

/// Importance-weighted subsample of a dataset given as per-pair counts.
///
/// Each point of pair `z` is kept with probability
/// `p_z = min(1, c · sens(z))` where `c = 8 log(2 M² / δ)`, and kept points carry
/// weight `1 / p_z`. With `enabled == false` the counts pass through
/// unchanged. Returns the center and the per-pair weights.
pub fn sensitivity_sample(
    class: &FiniteFunctionClass,
    center: usize,
    counts: &[f64],
    delta: f64,
    enabled: bool,
    rng: &mut Rng,
) -> Result<(usize, Vec<f64>)> {
    if counts.len() != class.n_states() * class.n_actions() {
        return Err(Error::dim("counts do not cover the class domain"));
    }
    if !enabled {
        return Ok((center, counts.to_vec()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0,1), got {delta}")));
    }
    let m = class.len() as f64;
    let oversample = 8.0 * (2.0 * m * m / delta).ln();
    let sens = sensitivities(class, counts);
    let weights = counts
        .iter()
        .zip(&sens)
        .map(|(&n, &s)| {
            let p = (oversample * s).min(1.0);
            if p >= 1.0 {
                return n;
            }
            if p <= 0.0 {
                return 0.0;
            }
            let trials = n.round() as u64;
            let kept = (0..trials).filter(|_| rng.random::<f64>() < p).count();
            kept as f64 / p
        })
        .collect();
    Ok((center, weights))
}

/// Result of one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralPass {
    pub beta: f64,
    /// Empirical minimizer id at each step.
    pub centers: Vec<usize>,
    pub regions: Vec<ConfidenceRegion>,
    /// `q[h][s * A + a]`, clipped to `[0, H]`.
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub policy: PolicyTable,
}

/// Robust-LSVI over a finite class.
///
/// Transitions from every step of every past episode are pooled into one
/// regression dataset, since the class is step-independent.
#[derive(Debug, Clone)]
pub struct GeneralLsviAgent {
    cfg: GeneralLsviConfig,
    class: FiniteFunctionClass,
    horizon: usize,
    init_state: usize,
    /// Visits per pair, as weights for the dataset norm.
    visits: Vec<f64>,
    /// Per `(pair, s')`: count, reward sum and squared-reward sum.
    next_counts: Vec<f64>,
    next_reward: Vec<f64>,
    next_reward_sq: Vec<f64>,
    transitions: Vec<(usize, usize, usize, f64, usize)>,
    episodes_seen: usize,
    sampler: Rng,
    last_pass: Option<GeneralPass>,
}

impl GeneralLsviAgent {
    /// `sampler` drives sensitivity sampling and is unused when it is off.
    pub fn new(
        cfg: GeneralLsviConfig,
        class: FiniteFunctionClass,
        horizon: usize,
        init_state: usize,
        sampler: Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        if horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if init_state >= class.n_states() {
            return Err(Error::param(format!("initial state {init_state} out of range")));
        }
        let pairs = class.n_states() * class.n_actions();
        let ns = class.n_states();
        Ok(Self {
            cfg,
            horizon,
            init_state,
            visits: vec![0.0; pairs],
            next_counts: vec![0.0; pairs * ns],
            next_reward: vec![0.0; pairs * ns],
            next_reward_sq: vec![0.0; pairs * ns],
            transitions: Vec::new(),
            class,
            episodes_seen: 0,
            sampler,
            last_pass: None,
        })
    }

    pub fn class(&self) -> &FiniteFunctionClass {
        &self.class
    }

    /// Stored transitions `(h, s, a, r, s')`.
    pub fn transitions(&self) -> &[(usize, usize, usize, f64, usize)] {
        &self.transitions
    }

    pub fn last_pass(&self) -> Option<&GeneralPass> {
        self.last_pass.as_ref()
    }

    /// Regression dataset `{(s, a, r + V_next(s'))}` over all stored transitions.
    pub fn regression_data(&self, v_next: &[f64]) -> Vec<(usize, usize, f64)> {
        self.transitions
            .iter()
            .map(|&(_, s, a, r, s_next)| (s, a, r + v_next[s_next]))
            .collect()
    }

    fn moments(&self, v_next: &[f64]) -> PairMoments {
        let ns = self.class.n_states();
        let mut fit = PairMoments::new(self.visits.len());
        for (pair, &n) in self.visits.iter().enumerate() {
            if n == 0.0 {
                continue;
            }
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for (s2, &v) in v_next.iter().enumerate() {
                let idx = pair * ns + s2;
                let c = self.next_counts[idx];
                if c > 0.0 {
                    let r = self.next_reward[idx];
                    sum += r + c * v;
                    sum_sq += self.next_reward_sq[idx] + 2.0 * r * v + c * v * v;
                }
            }
            fit.add(pair, n, sum, sum_sq);
        }
        fit
    }

    pub fn backward_pass(&mut self) -> Result<GeneralPass> {
        let k = self.episodes_seen + 1;
        let (ns, na) = (self.class.n_states(), self.class.n_actions());
        let hz = self.horizon;
        let cap = hz as f64;
        let beta = radius_beta_general(k, &self.cfg, self.class.len(), hz)?;
        let mut v = vec![vec![0.0; ns]; hz + 1];
        let mut q = vec![vec![0.0; ns * na]; hz];
        let mut centers = vec![0; hz];
        let mut regions = Vec::with_capacity(hz);
        for h in (0..hz).rev() {
            let fit = self.moments(&v[h + 1]);
            let center = fit.minimizer(&self.class);
            let (center, weights) = sensitivity_sample(
                &self.class,
                center,
                &self.visits,
                self.cfg.delta,
                self.cfg.subsample,
                &mut self.sampler,
            )?;
            let region = ConfidenceRegion::new(&self.class, center, &weights, beta)?;
            for s in 0..ns {
                for a in 0..na {
                    let b = width_bonus(&region, &self.class, s, a);
                    q[h][s * na + a] = (self.class.value(center, s, a) + b).clamp(0.0, cap);
                }
                let qs = &q[h][s * na..(s + 1) * na];
                v[h][s] = qs[greedy_action(qs)];
            }
            centers[h] = center;
            regions.push(region);
        }
        regions.reverse();
        let policy = PolicyTable::greedy(&q, ns, na);
        Ok(GeneralPass {
            beta,
            centers,
            regions,
            q,
            v,
            policy,
        })
    }
}

impl EpisodicAgent for GeneralLsviAgent {
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
        let (ns, na) = (self.class.n_states(), self.class.n_actions());
        for (h, s, a, s_next) in log.transitions() {
            if s >= ns || a >= na || s_next >= ns {
                return Err(Error::dim(format!("transition ({s},{a},{s_next}) out of range")));
            }
            let r = log.rewards[h];
            let pair = s * na + a;
            let idx = pair * ns + s_next;
            self.visits[pair] += 1.0;
            self.next_counts[idx] += 1.0;
            self.next_reward[idx] += r;
            self.next_reward_sq[idx] += r * r;
            self.transitions.push((h, s, a, r, s_next));
        }
        self.episodes_seen += 1;
        Ok(())
    }

    fn episodes_seen(&self) -> usize {
        self.episodes_seen
    }
}
