//! Value-targeted regression over a finite model class. Reports how often
//! the chosen model's value is optimistic and which models were picked.

use std::collections::BTreeMap;

use robust_rl::agent::EpisodicAgent;
use robust_rl::env::{build_random_env, evaluate_policy, exact_optimal_values};
use robust_rl::model_agent::{FiniteModelClass, UcrlVtrAgent, VtrConfig};
use robust_rl::rng::{stream, streams};

fn main() -> robust_rl::Result<()> {
    let mdp = build_random_env(5, 2, 4, &mut stream(2, streams::ENV))?;
    let class = FiniteModelClass::around_truth(&mdp, 9, 0.1, 0.5, &mut stream(2, streams::CLASS))?;
    let episodes = 400;
    let cfg = VtrConfig {
        episodes,
        c_prime: 1e-3,
        alpha_cover: Some(0.0),
        ..VtrConfig::default()
    };
    let mut agent = UcrlVtrAgent::new(cfg, class)?;
    let v_star = exact_optimal_values(&mdp).initial_value(&mdp);
    let mut rng = stream(2, streams::EPISODES);

    let (mut optimistic, mut regret) = (0, 0.0);
    let mut picks: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..episodes {
        let (plan, _) = agent.step_episode(&mdp, &mut rng)?;
        if plan.optimistic_value.is_some_and(|v| v >= v_star - 1e-9) {
            optimistic += 1;
        }
        regret += v_star - evaluate_policy(&mdp, &plan.policy)?;
        if let Some(choice) = agent.last_choice() {
            *picks.entry(choice.model_id).or_default() += 1;
        }
    }
    println!("V* = {v_star:.4}");
    println!("optimistic in {optimistic}/{episodes} episodes");
    println!("cumulative regret {regret:.3}");
    println!("model picks (id 0 is the truth): {picks:?}");
    Ok(())
}
