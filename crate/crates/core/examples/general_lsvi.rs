//! Optimistic least-squares value iteration over a finite value class on a
//! time-augmented tabular MDP. The class holds `Q*` and noisy copies of it,
//! combined step by step.

use robust_rl::env::build_random_env;
use robust_rl::general_agent::{FiniteFunctionClass, GeneralLsviAgent, GeneralLsviConfig};
use robust_rl::harness::run_agent;
use robust_rl::rng::{stream, streams};

fn main() -> robust_rl::Result<()> {
    let mdp = build_random_env(4, 2, 3, &mut stream(1, streams::ENV))?.time_augmented();
    let class = FiniteFunctionClass::layered_around_optimal(&mdp, 2, 1.0, &mut stream(1, streams::CLASS))?;
    println!("{} states, class of {} members", mdp.n_states(), class.len());

    let episodes = 300;
    let cfg = GeneralLsviConfig {
        episodes,
        c_prime: 0.1,
        ..GeneralLsviConfig::default()
    };
    let mut agent =
        GeneralLsviAgent::new(cfg, class, mdp.horizon(), mdp.init_state(), stream(1, streams::SUBSAMPLE))?;
    let log = run_agent(&mut agent, &mdp, episodes, &mut stream(1, streams::EPISODES))?;
    for k in [10, 50, 100, 200, 300] {
        println!("k={k:>4}  cumulative regret {:.3}", log.cumulative_at(k).unwrap_or(f64::NAN));
    }
    let late = log.tail_mean_regret(0.25);
    println!("mean regret over the last quarter: {late:.4}");
    Ok(())
}
