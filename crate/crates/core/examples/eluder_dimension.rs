//! Eluder dimension and cover size of a small value class, exact and greedy.

use robust_rl::eluder::{cover_size, eluder_dimension, EluderMode, EluderQuery};
use robust_rl::env::build_random_env;
use robust_rl::general_agent::FiniteFunctionClass;
use robust_rl::rng::{stream, streams};

fn main() -> robust_rl::Result<()> {
    let mdp = build_random_env(2, 2, 3, &mut stream(3, streams::ENV))?.time_augmented();
    let class = FiniteFunctionClass::around_optimal(&mdp, 20, 1.0, &mut stream(3, streams::CLASS))?;
    let domain: Vec<(usize, usize)> = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .collect();

    println!("{} functions on {} state-action pairs", class.len(), domain.len());
    println!("{:>6} {:>10} {:>8} {:>6}", "eps", "exhaustive", "greedy", "cover");
    for eps in [0.25, 0.5, 1.0, 1.25, 1.5, 1.75] {
        let exact = EluderQuery::from_class(&class, &domain, eps, EluderMode::Exhaustive)?;
        let greedy = EluderQuery::from_class(&class, &domain, eps, EluderMode::Greedy { restarts: 16, seed: 0 })?;
        println!(
            "{eps:>6} {:>10} {:>8} {:>6}",
            eluder_dimension(&exact)?.dimension,
            eluder_dimension(&greedy)?.dimension,
            cover_size(class.members(), eps)?
        );
    }
    Ok(())
}
