//! An environment whose linear features are badly wrong inside a trap region
//! (pointwise error 1) yet accurate on average under every probed policy.

use robust_rl::harness::{verify_environment, RunConfig};

const CONFIG: &str = r#"
[env]
kind = "linear"
states = 6
actions = 2
horizon = 4

[env.injector]
mode = "local_trap"
zeta = 0.1
trap_states = [5]
exit_state = 4

[algorithm]
name = "linear_lsvi"
zeta = 0.1

[run]
episodes = 1
"#;

fn main() -> robust_rl::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG, None)?;
    let zeta = cfg.env.injector.zeta;
    let (_, report) = verify_environment(&cfg)?;
    println!("pointwise max xi = {}", report.pointwise_max_xi);
    println!("{} probe policies", report.n_probes);
    for (b, m) in report.xi_moments.iter().enumerate() {
        let bound = zeta.powi(b as i32 + 1);
        println!("beta={}  max E[xi^beta] = {m:.3e}  <=  zeta^beta = {bound:.3e}", b + 1);
    }
    println!("within zeta: {}", report.within(zeta, 1e-12));
    Ok(())
}
