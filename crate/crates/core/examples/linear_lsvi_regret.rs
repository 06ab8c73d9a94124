//! LSVI-UCB on an exact linear MDP with `d < S·A`; prints cumulative regret
//! at a few checkpoints. The bonus scale `c_beta` is small; the worst-case
//! constant explores for far longer than this horizon.

use robust_rl::env::build_linear_env;
use robust_rl::harness::run_agent;
use robust_rl::linear_agent::{LinearLsviAgent, LinearLsviConfig};
use robust_rl::rng::{stream, streams};

fn main() -> robust_rl::Result<()> {
    let (mdp, spec) = build_linear_env(4, 6, 2, 4, &mut stream(0, streams::ENV))?;
    let episodes = 2000;
    let cfg = LinearLsviConfig {
        c_beta: 0.03,
        episodes,
        ..LinearLsviConfig::default()
    };
    let mut agent = LinearLsviAgent::new(cfg, spec, mdp.horizon(), mdp.init_state())?;
    let log = run_agent(&mut agent, &mdp, episodes, &mut stream(0, streams::EPISODES))?;

    println!("V* = {:.4}", log.v_star());
    println!("{:>6} {:>12} {:>14}", "k", "regret", "regret/sqrt(k)");
    for k in [100, 250, 500, 1000, 2000] {
        let r = log.cumulative_at(k).unwrap_or(f64::NAN);
        println!("{k:>6} {r:>12.3} {:>14.4}", r / (k as f64).sqrt());
    }
    Ok(())
}
