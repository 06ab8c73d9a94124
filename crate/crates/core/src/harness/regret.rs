//! Exact per-episode regret accounting.

use std::io::Write;
use std::path::Path;

use super::format::{fmt_g12, fmt_opt};
use crate::error::{Error, Result};

/// Which part of a meta run an episode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Epoch(usize),
    Commit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRecord {
    /// 1-based episode index.
    pub k: usize,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
    pub optimistic_value: Option<f64>,
    /// Exact `V^{π_k}_1(s_1)`.
    pub policy_value: f64,
    pub sampled_return: f64,
    pub phase: Option<Phase>,
}

/// Per-episode regret against a fixed optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLog {
    v_star: f64,
    records: Vec<RegretRecord>,
}

pub const CSV_HEADER: [&str; 8] = [
    "k",
    "instant_regret",
    "cumulative_regret",
    "optimistic_value",
    "policy_value",
    "sampled_return",
    "epoch",
    "phase",
];

impl RegretLog {
    pub fn new(v_star: f64) -> Self {
        Self {
            v_star,
            records: Vec::new(),
        }
    }

    pub fn v_star(&self) -> f64 {
        self.v_star
    }

    pub fn push(
        &mut self,
        policy_value: f64,
        optimistic_value: Option<f64>,
        sampled_return: f64,
        phase: Option<Phase>,
    ) -> &RegretRecord {
        let instant_regret = self.v_star - policy_value;
        let cumulative_regret = self.final_regret() + instant_regret;
        self.records.push(RegretRecord {
            k: self.records.len() + 1,
            instant_regret,
            cumulative_regret,
            optimistic_value,
            policy_value,
            sampled_return,
            phase,
        });
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[RegretRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Cumulative regret after all episodes (0 for an empty log).
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_regret)
    }

    /// Cumulative regret after episode `k` (1-based); `k = 0` gives 0.
    pub fn cumulative_at(&self, k: usize) -> Option<f64> {
        match k {
            0 => Some(0.0),
            _ => self.records.get(k - 1).map(|r| r.cumulative_regret),
        }
    }

    /// Mean instant regret over the last `fraction` of episodes.
    pub fn tail_mean_regret(&self, fraction: f64) -> f64 {
        let n = self.records.len();
        let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let tail = &self.records[n.saturating_sub(take)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.instant_regret).sum::<f64>() / tail.len() as f64
    }

    /// `(1/K) Σ_k max(0, V* − V_1^k(s_1))` over episodes reporting an estimate.
    pub fn mean_optimism_shortfall(&self) -> f64 {
        let gaps: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.optimistic_value)
            .map(|v| (self.v_star - v).max(0.0))
            .collect();
        if gaps.is_empty() {
            return 0.0;
        }
        gaps.iter().sum::<f64>() / gaps.len() as f64
    }

    /// Checks the invariants every emitted log must satisfy.
    pub fn check(&self, tol: f64) -> Result<()> {
        let mut running = 0.0;
        for r in &self.records {
            running += r.instant_regret;
            if r.instant_regret < -tol {
                return Err(Error::Internal(format!(
                    "episode {} has negative regret {}",
                    r.k, r.instant_regret
                )));
            }
            if (running - r.cumulative_regret).abs() > tol {
                return Err(Error::Internal(format!("cumulative regret drifts at episode {}", r.k)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            let (epoch, phase) = match r.phase {
                None => (String::new(), String::new()),
                Some(Phase::Epoch(i)) => (i.to_string(), "epoch".to_string()),
                Some(Phase::Commit(j)) => (j.to_string(), "commit".to_string()),
            };
            w.write_record([
                r.k.to_string(),
                fmt_g12(r.instant_regret),
                fmt_g12(r.cumulative_regret),
                fmt_opt(r.optimistic_value),
                fmt_g12(r.policy_value),
                fmt_g12(r.sampled_return),
                epoch,
                phase,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
