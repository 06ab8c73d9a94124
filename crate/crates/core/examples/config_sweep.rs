//! A TOML-driven sweep over misspecification levels and two learners,
//! written to a temporary directory.

use robust_rl::harness::{run_sweep, RunConfig};

const CONFIG: &str = r#"
[env]
kind = "linear"
states = 6
actions = 2
horizon = 4

[env.injector]
mode = "global"
zeta = 0.0

[algorithm]
name = "linear_lsvi"
c_beta = 0.01

[run]
episodes = 500
seeds = [0, 1, 2, 3, 4]

[sweep]
zetas = [0.0, 0.05, 0.1, 0.2]
algorithms = ["linear_lsvi", "meta"]
"#;

fn main() -> robust_rl::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG, None)?;
    let out = std::env::temp_dir().join("robust-rl-config-sweep");
    let cells = run_sweep(&cfg, Some(&out), None)?;
    println!("{:<24} {:>10} {:>10} {:>10}", "cell", "median", "q1", "q3");
    for c in &cells {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<24} {:>10} {:>10} {:>10}", c.cell.name, f(c.median), f(c.q1), f(c.q3));
    }
    println!("logs in {}", out.display());
    Ok(())
}
