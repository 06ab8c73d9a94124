//! Exact backward induction on a slippery chain, checked against the value
//! of every constant policy and the occupancy of the optimal one.

use robust_rl::env::{build_chain_env, evaluate_policy, exact_optimal_values, occupancy_measure, PolicyTable};

fn main() -> robust_rl::Result<()> {
    let mdp = build_chain_env(6, 2, 8, 0.1)?;
    let opt = exact_optimal_values(&mdp);
    println!("V*_1(s_1) = {:.6}", opt.initial_value(&mdp));
    for h in 0..mdp.horizon() {
        let row: Vec<String> = opt.v[h].iter().map(|v| format!("{v:6.3}")).collect();
        println!("h={h}  V* = [{}]", row.join(" "));
    }

    for a in 0..mdp.n_actions() {
        let pi = PolicyTable::constant(&mdp, a)?;
        println!("always action {a}: {:.6}", evaluate_policy(&mdp, &pi)?);
    }

    let occ = occupancy_measure(&mdp, &opt.policy)?;
    let na = mdp.n_actions();
    for (h, d) in occ.iter().enumerate() {
        let states: Vec<String> = (0..mdp.n_states())
            .map(|s| format!("{:.3}", d[s * na..(s + 1) * na].iter().sum::<f64>()))
            .collect();
        println!("h={h}  d*(s) = [{}]", states.join(" "));
    }
    Ok(())
}
