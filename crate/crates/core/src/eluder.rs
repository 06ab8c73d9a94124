//! Eluder dimension and covering numbers of finite classes on finite domains.

use rand::seq::SliceRandom;

use crate::env::dot;
use crate::error::{Error, Result};
use crate::general_agent::FiniteFunctionClass;
use crate::model_agent::FiniteModelClass;
use crate::rng::{stream, streams, Rng};

/// Largest domain the exhaustive search accepts.
pub const MAX_EXHAUSTIVE_DOMAIN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EluderMode {
    Exhaustive,
    /// Greedy extension from `restarts` shuffled orders; a lower bound.
    Greedy { restarts: usize, seed: u64 },
}

/// A class restricted to a finite domain: `values[m][j]` is member `m` at
/// domain point `j`. Repeated points are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct EluderQuery {
    pub values: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub mode: EluderMode,
}

impl EluderQuery {
    pub fn new(values: Vec<Vec<f64>>, epsilon: f64, mode: EluderMode) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        if values.is_empty() {
            return Err(Error::param("class must have at least one member"));
        }
        if n == 0 {
            return Err(Error::param("domain must be non-empty"));
        }
        if values.iter().any(|v| v.len() != n) {
            return Err(Error::dim("members disagree on the domain size"));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::param(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        Ok(Self { values, epsilon, mode })
    }

    /// A value class on the state-action points `domain`.
    pub fn from_class(class: &FiniteFunctionClass, domain: &[(usize, usize)], epsilon: f64, mode: EluderMode) -> Result<Self> {
        for &(s, a) in domain {
            if s >= class.n_states() || a >= class.n_actions() {
                return Err(Error::dim(format!("domain point ({s},{a}) outside the class")));
            }
        }
        let values = (0..class.len())
            .map(|id| domain.iter().map(|&(s, a)| class.value(id, s, a)).collect())
            .collect();
        Self::new(values, epsilon, mode)
    }

    /// A model class lifted to `f(h, s, a, V) = P V(s, a)` on the given points.
    pub fn from_model_class(
        class: &FiniteModelClass,
        domain: &[(usize, usize, usize, Vec<f64>)],
        epsilon: f64,
        mode: EluderMode,
    ) -> Result<Self> {
        for (h, s, a, v) in domain {
            if *h >= class.horizon() || *s >= class.n_states() || *a >= class.n_actions() || v.len() != class.n_states() {
                return Err(Error::dim(format!("domain point ({h},{s},{a},·) outside the class")));
            }
        }
        let values = class
            .members()
            .iter()
            .map(|p| domain.iter().map(|(h, s, a, v)| dot(p.row(*h, *s, *a), v)).collect())
            .collect();
        Self::new(values, epsilon, mode)
    }

    pub fn domain_size(&self) -> usize {
        self.values[0].len()
    }
}

/// Whether `point` is `ε`-independent of `sequence`: some pair `f, f'` has
/// `‖f − f'‖_Z ≤ ε` and `|f(x) − f'(x)| > ε`.
pub fn is_independent(values: &[Vec<f64>], point: usize, sequence: &[usize], epsilon: f64) -> bool {
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let (f, g) = (&values[i], &values[j]);
            let gap = (f[point] - g[point]).abs();
            if gap <= epsilon {
                continue;
            }
            let norm = sequence.iter().map(|&z| (f[z] - g[z]).powi(2)).sum::<f64>().sqrt();
            if norm <= epsilon {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EluderResult {
    pub dimension: usize,
    /// `false` when `dimension` is only a lower bound.
    pub exact: bool,
}

/// A finite union of half-open intervals `[lo, hi)`, sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Default)]
struct IntervalSet(Vec<(f64, f64)>);

impl IntervalSet {
    fn from_intervals(mut parts: Vec<(f64, f64)>) -> Self {
        parts.retain(|(lo, hi)| lo < hi);
        parts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (lo, hi) in parts {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Self(merged)
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            let lo = a.0.max(b.0);
            let hi = a.1.min(b.1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a.1 < b.1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self(out)
    }

    fn union(&self, other: &Self) -> Self {
        let mut parts = self.0.clone();
        parts.extend_from_slice(&other.0);
        Self::from_intervals(parts)
    }
}

/// Pairs `(i, j)` with `i < j` and their per-point squared gaps.
struct PairGaps {
    gaps: Vec<Vec<f64>>,
}

impl PairGaps {
    fn new(values: &[Vec<f64>]) -> Self {
        let mut gaps = Vec::new();
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                gaps.push(values[i].iter().zip(&values[j]).map(|(a, b)| (a - b).abs()).collect());
            }
        }
        Self { gaps }
    }

    /// The `ε'` values that make `x` independent of a prefix whose squared
    /// pair norms are `norm_sq`: the union of `[‖f − f'‖_Z, |f(x) − f'(x)|)`.
    fn admissible(&self, x: usize, norm_sq: &[f64]) -> IntervalSet {
        IntervalSet::from_intervals(
            self.gaps
                .iter()
                .zip(norm_sq)
                .map(|(g, &n)| (n.sqrt(), g[x]))
                .collect(),
        )
    }
}

/// Length of the longest sequence whose elements are each `ε'`-independent
/// of their predecessors, for some `ε' ≥ ε`.
pub fn eluder_dimension(q: &EluderQuery) -> Result<EluderResult> {
    match q.mode {
        EluderMode::Exhaustive => exhaustive(q).map(|d| EluderResult { dimension: d, exact: true }),
        EluderMode::Greedy { restarts, seed } => Ok(EluderResult {
            dimension: greedy(q, restarts.max(1), seed),
            exact: false,
        }),
    }
}

fn exhaustive(q: &EluderQuery) -> Result<usize> {
    let n = q.domain_size();
    if n > MAX_EXHAUSTIVE_DOMAIN {
        return Err(Error::param(format!(
            "exhaustive search is limited to {MAX_EXHAUSTIVE_DOMAIN} domain points (got {n}); use greedy mode"
        )));
    }
    let pairs = PairGaps::new(&q.values);
    let n_pairs = pairs.gaps.len();
    if n_pairs == 0 {
        return Ok(0);
    }
    let subsets = 1usize << n;
    // norm_sq[mask * n_pairs + p]: squared distance of pair p on the points in mask.
    let mut norm_sq = vec![0.0; subsets * n_pairs];
    for mask in 1..subsets {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        for p in 0..n_pairs {
            let g = pairs.gaps[p][low];
            norm_sq[mask * n_pairs + p] = norm_sq[rest * n_pairs + p] + g * g;
        }
    }
    let mut feasible: Vec<IntervalSet> = vec![IntervalSet::default(); subsets];
    feasible[0] = IntervalSet(vec![(q.epsilon, f64::INFINITY)]);
    let mut best = 0;
    for mask in 1..subsets {
        let mut set = IntervalSet::default();
        for x in 0..n {
            if mask & (1 << x) == 0 {
                continue;
            }
            let prev = mask ^ (1 << x);
            if feasible[prev].is_empty() {
                continue;
            }
            let allowed = pairs.admissible(x, &norm_sq[prev * n_pairs..(prev + 1) * n_pairs]);
            set = set.union(&feasible[prev].intersect(&allowed));
        }
        if !set.is_empty() {
            best = best.max(mask.count_ones() as usize);
        }
        feasible[mask] = set;
    }
    Ok(best)
}

fn greedy(q: &EluderQuery, restarts: usize, seed: u64) -> usize {
    let n = q.domain_size();
    let pairs = PairGaps::new(&q.values);
    if pairs.gaps.is_empty() {
        return 0;
    }
    let mut rng: Rng = stream(seed, streams::CLASS);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = 0;
    for r in 0..restarts {
        if r > 0 {
            order.shuffle(&mut rng);
        }
        let mut feasible = IntervalSet(vec![(q.epsilon, f64::INFINITY)]);
        let mut norm_sq = vec![0.0; pairs.gaps.len()];
        let mut len = 0;
        loop {
            let next = order.iter().find_map(|&x| {
                let f = feasible.intersect(&pairs.admissible(x, &norm_sq));
                (!f.is_empty()).then_some((x, f))
            });
            let Some((x, f)) = next else { break };
            feasible = f;
            for (p, g) in pairs.gaps.iter().enumerate() {
                norm_sq[p] += g[x] * g[x];
            }
            len += 1;
        }
        best = best.max(len);
    }
    best
}

/// Size of a greedy `ε`-cover of `members` by members, in sup norm.
///
/// Each round adds the member covering the most uncovered members, lowest
/// id first on ties.
pub fn cover_size(members: &[Vec<f64>], epsilon: f64) -> Result<usize> {
    if !(epsilon >= 0.0) {
        return Err(Error::param(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let m = members.len();
    let close: Vec<Vec<bool>> = (0..m)
        .map(|i| (0..m).map(|j| sup_distance(&members[i], &members[j]) <= epsilon).collect())
        .collect();
    let mut covered = vec![false; m];
    let mut size = 0;
    while covered.iter().any(|c| !c) {
        let (best, _) = (0..m)
            .map(|i| (i, (0..m).filter(|&j| !covered[j] && close[i][j]).count()))
            .fold((0, 0), |acc, (i, c)| if c > acc.1 { (i, c) } else { acc });
        for j in 0..m {
            if close[best][j] {
                covered[j] = true;
            }
        }
        size += 1;
    }
    Ok(size)
}

pub fn sup_distance(f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
