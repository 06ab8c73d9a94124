//! The epoch-doubling meta learner on a trap environment whose
//! misspecification level is hidden from the base learner.

use robust_rl::agent::EpisodicAgent;
use robust_rl::harness::{build_environment, RunConfig};
use robust_rl::linear_agent::{LinearLsviAgent, LinearLsviConfig};
use robust_rl::meta::{run_meta, MetaConfig};
use robust_rl::rng::{stream, streams};

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
name = "meta"
base = "linear_lsvi"
zeta = "unknown"

[run]
episodes = 4096
"#;

fn main() -> robust_rl::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG, None)?;
    let env = build_environment(&cfg.env)?;
    let budget = cfg.run.episodes;
    let mut factory = |zeta: f64, len: usize| -> robust_rl::Result<Box<dyn EpisodicAgent>> {
        let c = LinearLsviConfig {
            c_beta: 0.01,
            zeta,
            episodes: len,
            ..LinearLsviConfig::default()
        };
        let agent = LinearLsviAgent::new(c, env.spec.clone(), env.mdp.horizon(), env.mdp.init_state())?;
        Ok(Box::new(agent))
    };
    let meta = MetaConfig::linear(env.spec.dim());
    let state = run_meta(&mut factory, &env.mdp, budget, &meta, &mut stream(0, streams::EPISODES))?;

    println!("stability constant C = {:.2}", state.stability_constant);
    println!("{:>5} {:>8} {:>6} {:>10} {:>8}", "epoch", "zeta", "len", "vbar", "violated");
    for e in &state.epochs {
        let vbar = e.vbar.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:>5} {:>8.4} {:>6} {:>10} {:>8}", e.plan.index, e.plan.zeta, e.plan.len, vbar, e.violated);
    }
    println!("committed epoch {:?}", state.committed_epoch);
    println!("cumulative regret {:.3} over {} episodes", state.log.final_regret(), state.episodes_consumed);
    Ok(())
}
