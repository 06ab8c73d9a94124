//! Checking a configured environment against the locally-bounded
//! misspecification condition.

use std::path::Path;

use super::build::{build_environment, Environment};
use super::config::RunConfig;
use super::format::fmt_g12;
use crate::env::{region_seeking_probes, standard_probes, verify_lbm_assumption, AssumptionReport, InjectionMode, MAX_MOMENT};
use crate::error::{Error, Result};
use crate::rng::{stream, streams};

/// Moments of the configured environment under the standard probes, plus
/// trap-seeking probes for local-trap instances.
pub fn verify_environment(cfg: &RunConfig) -> Result<(Environment, AssumptionReport)> {
    let env = build_environment(&cfg.env)?;
    let mut rng = stream(cfg.env.seed, streams::PROBES);
    let mut probes = standard_probes(&env.base, 8, &mut rng)?;
    if cfg.env.injector.mode == InjectionMode::LocalTrap {
        probes.extend(region_seeking_probes(&env.base, &cfg.env.injector.trap_states)?);
    }
    let report = verify_lbm_assumption(&env.base, &env.spec, &probes, MAX_MOMENT)?;
    Ok((env, report))
}

/// One row per moment order `β`.
pub fn write_report(report: &AssumptionReport, zeta: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "beta",
        "xi_moment",
        "eta_moment",
        "xi_moment_step_averaged",
        "eta_moment_step_averaged",
        "zeta_pow_beta",
        "pointwise_max_xi",
        "pointwise_max_eta",
    ])?;
    for b in 0..report.xi_moments.len() {
        w.write_record([
            (b + 1).to_string(),
            fmt_g12(report.xi_moments[b]),
            fmt_g12(report.eta_moments[b]),
            fmt_g12(report.xi_moments_averaged[b]),
            fmt_g12(report.eta_moments_averaged[b]),
            fmt_g12(zeta.powi(b as i32 + 1)),
            fmt_g12(report.pointwise_max_xi),
            fmt_g12(report.pointwise_max_eta),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
