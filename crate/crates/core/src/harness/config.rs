//! Run configuration: a TOML document with `[env]`, `[algorithm]`, `[run]`
//! and an optional `[sweep]` table. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{InjectionMode, MisspecInjector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub algorithm: AlgorithmConfig,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// Random exact linear MDP; `dim` defaults to `S * A` (one-hot features).
    Linear,
    /// Left/right chain with slip; one-hot features.
    Chain,
    /// Random tabular MDP; one-hot features.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "default_slip")]
    pub slip: f64,
    #[serde(default)]
    pub seed: u64,
    /// Replace the MDP by its time-augmented copy (state `h * S + s`).
    #[serde(default)]
    pub time_augment: bool,
    #[serde(default)]
    pub injector: InjectorConfig,
}

fn default_slip() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectorConfig {
    #[serde(default = "default_mode")]
    pub mode: InjectionMode,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default = "default_delta_tv")]
    pub delta_tv: f64,
    #[serde(default)]
    pub trap_states: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_state: Option<usize>,
    /// Cap on the probability of entering the trap; defaults to `(ζ/Δ)⁴`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach_prob: Option<f64>,
}

fn default_mode() -> InjectionMode {
    InjectionMode::None
}

fn default_delta_tv() -> f64 {
    1.0
}

impl Default for InjectorConfig {
    fn default() -> Self {
        Self {
            mode: InjectionMode::None,
            zeta: 0.0,
            delta_tv: 1.0,
            trap_states: Vec::new(),
            exit_state: None,
            reach_prob: None,
        }
    }
}

impl InjectorConfig {
    pub fn injector(&self) -> MisspecInjector {
        match self.mode {
            InjectionMode::None => MisspecInjector::none(),
            InjectionMode::Global => MisspecInjector::global(self.zeta),
            InjectionMode::LocalTrap => {
                let mut inj = MisspecInjector::local_trap(self.zeta, self.delta_tv, self.trap_states.clone());
                if let Some(p) = self.reach_prob {
                    inj.reach_prob = p;
                }
                inj
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    LinearLsvi,
    GeneralLsvi,
    UcrlVtr,
    Meta,
}

impl AlgorithmName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinearLsvi => "linear_lsvi",
            Self::GeneralLsvi => "general_lsvi",
            Self::UcrlVtr => "ucrl_vtr",
            Self::Meta => "meta",
        }
    }
}

/// A misspecification level, or the word `"unknown"` for meta runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaSetting {
    Known(f64),
    Word(UnknownWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownWord {
    Unknown,
}

impl ZetaSetting {
    pub fn known(self) -> Option<f64> {
        match self {
            Self::Known(z) => Some(z),
            Self::Word(_) => None,
        }
    }
}

impl Default for ZetaSetting {
    fn default() -> Self {
        Self::Known(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassAnchor {
    /// Member 0 is the true model (or its optimal Q table).
    #[default]
    Truth,
    /// Member 0 is the exact linear MDP before injection, a stand-in within
    /// the injected misspecification of the truth.
    LinearFit,
    /// Member 0 is a model that spends the error budget `anchor_zeta` on
    /// favouring suboptimal actions; see [`biased_kernel`](crate::model_agent::biased_kernel).
    Biased,
}

/// Where a function or model class comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    /// A class file; value classes use the text table format, model
    /// classes JSON. Relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "default_perturbed")]
    pub perturbed: usize,
    /// Noise amplitude for value-class copies.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Value classes only: perturb each step of a time-augmented
    /// environment separately and take every combination.
    #[serde(default)]
    pub layered: bool,
    /// TV range for model-class copies.
    #[serde(default = "default_min_tv")]
    pub min_tv: f64,
    #[serde(default = "default_max_tv")]
    pub max_tv: f64,
    #[serde(default)]
    pub anchor: ClassAnchor,
    /// Error budget of the `biased` anchor.
    #[serde(default = "default_anchor_zeta")]
    pub anchor_zeta: f64,
}

fn default_perturbed() -> usize {
    15
}
fn default_scale() -> f64 {
    1.0
}
fn default_min_tv() -> f64 {
    0.1
}
fn default_max_tv() -> f64 {
    0.5
}
fn default_anchor_zeta() -> f64 {
    0.1
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self {
            file: None,
            perturbed: default_perturbed(),
            scale: default_scale(),
            layered: false,
            min_tv: default_min_tv(),
            max_tv: default_max_tv(),
            anchor: ClassAnchor::Truth,
            anchor_zeta: default_anchor_zeta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgorithmName,
    /// Base learner of a meta run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<AlgorithmName>,
    #[serde(default)]
    pub zeta: ZetaSetting,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_one")]
    pub c_beta: f64,
    #[serde(default = "default_one")]
    pub lambda: f64,
    #[serde(default = "default_one")]
    pub c_prime: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_t: Option<f64>,
    #[serde(default)]
    pub log_w: f64,
    #[serde(default)]
    pub subsample: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_cover: Option<f64>,
    #[serde(default = "default_one")]
    pub l_const: f64,
    /// Fixed stability constant for meta runs, replacing the formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<f64>,
    /// Complexity `d` in the stability constant; defaults to the feature
    /// dimension for a linear base and to `S * A` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassConfig>,
}

fn default_delta() -> f64 {
    0.05
}
fn default_one() -> f64 {
    1.0
}

impl AlgorithmConfig {
    pub fn new(name: AlgorithmName) -> Self {
        Self {
            name,
            base: None,
            zeta: ZetaSetting::default(),
            delta: default_delta(),
            c_beta: 1.0,
            lambda: 1.0,
            c_prime: 1.0,
            cover_t: None,
            log_w: 0.0,
            subsample: false,
            alpha_cover: None,
            l_const: 1.0,
            stability: None,
            complexity: None,
            class: None,
        }
    }

    /// The learner that actually interacts: `base` for meta, else `name`.
    pub fn learner(&self) -> AlgorithmName {
        match self.name {
            AlgorithmName::Meta => self.base.unwrap_or(AlgorithmName::LinearLsvi),
            n => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Each value sets both the injected level and the learner's known ζ.
    #[serde(default)]
    pub zetas: Vec<f64>,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmName>,
}

impl RunConfig {
    /// Parses and validates; `origin` names the source in messages and
    /// anchors relative class paths.
    pub fn from_toml(text: &str, origin: Option<&Path>) -> Result<Self> {
        let name = origin.map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{name}: {e}")))?;
        if let (Some(dir), Some(class)) = (origin.and_then(Path::parent), cfg.algorithm.class.as_mut()) {
            if let Some(f) = class.file.as_mut() {
                if f.is_relative() {
                    *f = dir.join(&*f);
                }
            }
        }
        cfg.validate().map_err(|e| Error::Config(format!("{name}: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, Some(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let e = &self.env;
        if e.states == 0 || e.actions == 0 || e.horizon == 0 {
            return Err("env: states, actions and horizon must be positive".into());
        }
        if let Some(d) = e.dim {
            if e.kind != EnvKind::Linear {
                return Err("env.dim: only meaningful for kind = \"linear\"".into());
            }
            if d == 0 || d > e.states * e.actions {
                return Err(format!("env.dim: must lie in 1..={}", e.states * e.actions));
            }
        }
        if !(0.0..=1.0).contains(&e.slip) {
            return Err("env.slip: must lie in [0, 1]".into());
        }
        e.injector
            .injector()
            .validate(e.states)
            .map_err(|err| format!("env.injector: {err}"))?;
        if let Some(x) = e.injector.exit_state {
            if x >= e.states {
                return Err("env.injector.exit_state: out of range".into());
            }
        }
        let a = &self.algorithm;
        match (a.name, a.base) {
            (AlgorithmName::Meta, Some(AlgorithmName::Meta)) => return Err("algorithm.base: cannot be meta".into()),
            (AlgorithmName::Meta, _) => {
                if a.zeta.known().is_some_and(|z| z != 0.0) {
                    return Err("algorithm.zeta: meta runs do not take a known zeta; use \"unknown\"".into());
                }
            }
            (_, Some(_)) => return Err("algorithm.base: only meta runs take a base".into()),
            (_, None) => match a.zeta.known() {
                None => return Err("algorithm.zeta: \"unknown\" requires name = \"meta\"".into()),
                Some(z) if !(0.0..=1.0).contains(&z) => return Err("algorithm.zeta: must lie in [0, 1]".into()),
                _ => {}
            },
        }
        if !(a.delta > 0.0 && a.delta < 1.0) {
            return Err("algorithm.delta: must lie in (0, 1)".into());
        }
        for (field, v) in [("c_beta", a.c_beta), ("lambda", a.lambda), ("c_prime", a.c_prime)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("algorithm.{field}: must be positive"));
            }
        }
        if a.learner() == AlgorithmName::LinearLsvi && e.time_augment {
            return Err("env.time_augment: not supported with the linear learner".into());
        }
        if let Some(c) = &a.class {
            if !(0.0 <= c.min_tv && c.min_tv <= c.max_tv && c.max_tv <= 1.0) {
                return Err("algorithm.class: need 0 <= min_tv <= max_tv <= 1".into());
            }
            if !(0.0..=1.0).contains(&c.anchor_zeta) {
                return Err("algorithm.class.anchor_zeta: must lie in [0, 1]".into());
            }
            if !(c.scale >= 0.0) {
                return Err("algorithm.class.scale: must be nonnegative".into());
            }
        }
        if self.run.episodes == 0 {
            return Err("run.episodes: must be at least 1".into());
        }
        if self.run.seeds.is_empty() {
            return Err("run.seeds: must list at least one seed".into());
        }
        if let Some(s) = &self.sweep {
            if s.zetas.iter().any(|z| !(0.0..=1.0).contains(z)) {
                return Err("sweep.zetas: values must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}
