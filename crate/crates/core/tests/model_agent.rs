use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng as _;
use robust_rl::agent::EpisodicAgent;
use robust_rl::env::{build_random_env, exact_optimal_values, TabularMdp};
use robust_rl::model_agent::{
    biased_kernel, model_distance, optimistic_model, perturbed_kernel, radius_beta_vtr, vtr_loss, vtr_minimizer,
    FiniteModelClass, UcrlVtrAgent, VtrConfig, VtrEpisode, VtrHistory,
};
use robust_rl::rng::{stream, Rng};

fn random_mdp(seed: u64) -> TabularMdp {
    build_random_env(4, 2, 3, &mut stream(seed, 0)).unwrap()
}

fn random_history(mdp: &TabularMdp, episodes: usize, rng: &mut Rng) -> VtrHistory {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let episodes = (0..episodes)
        .map(|_| VtrEpisode {
            transitions: (0..hz)
                .map(|_| (rng.random_range(0..ns), rng.random_range(0..na), rng.random_range(0..ns)))
                .collect(),
            values: (0..hz)
                .map(|h| {
                    if h == hz - 1 {
                        vec![0.0; ns]
                    } else {
                        (0..ns).map(|_| rng.random::<f64>() * (hz - h - 1) as f64).collect()
                    }
                })
                .collect(),
        })
        .collect();
    VtrHistory { episodes }
}

fn vtr_cfg(episodes: usize, c_prime: f64) -> VtrConfig {
    VtrConfig {
        delta: 0.05,
        zeta: 0.0,
        episodes,
        c_prime,
        alpha_cover: Some(0.0),
    }
}

fn train(agent: &mut UcrlVtrAgent, mdp: &TabularMdp, episodes: usize, rng: &mut Rng) {
    for _ in 0..episodes {
        agent.step_episode(mdp, rng).unwrap();
    }
}

#[test]
fn loss_matches_reordered_sum() {
    let mdp = random_mdp(0);
    let hist = random_history(&mdp, 15, &mut stream(0, 1));
    let mut oracle = 0.0;
    for ep in hist.episodes.iter().rev() {
        for h in (0..3).rev() {
            let (s, a, s2) = ep.transitions[h];
            let v = &ep.values[h];
            let pred: f64 = (0..4).rev().map(|x| mdp.row(h, s, a)[x] * v[x]).sum();
            oracle += (pred - v[s2]).powi(2);
        }
    }
    assert_relative_eq!(vtr_loss(&mdp, &hist).unwrap(), oracle, max_relative = 1e-12);
}

#[test]
fn empty_history_gives_zero_loss_and_member_zero() {
    let mdp = random_mdp(1);
    let hist = VtrHistory::default();
    assert_eq!(vtr_loss(&mdp, &hist).unwrap(), 0.0);
    let class = FiniteModelClass::around_truth(&mdp, 5, 0.1, 0.5, &mut stream(1, 3)).unwrap();
    assert_eq!(vtr_minimizer(&class, &hist).unwrap(), 0);
}

#[test]
fn truth_wins_on_deterministic_dynamics() {
    let (hz, ns, na) = (3, 4, 2);
    let mut rng = stream(2, 0);
    let mut p = vec![0.0; hz * ns * na * ns];
    for row in p.chunks_mut(ns) {
        row[rng.random_range(0..ns)] = 1.0;
    }
    let rewards = (0..ns * na).map(|_| rng.random::<f64>()).collect();
    let truth = TabularMdp::new(hz, ns, na, p, rewards, 0).unwrap();
    let mut members: Vec<_> = (0..5).map(|_| perturbed_kernel(&truth, 0.3, &mut rng).unwrap()).collect();
    members.insert(3, truth.clone());
    let class = FiniteModelClass::new(members).unwrap();
    let mut agent = UcrlVtrAgent::new(vtr_cfg(30, 1.0), class.clone()).unwrap();
    train(&mut agent, &truth, 30, &mut stream(2, 1));
    assert_eq!(vtr_loss(&truth, agent.history()).unwrap(), 0.0);
    assert_eq!(vtr_minimizer(&class, agent.history()).unwrap(), 3);
}

#[test]
fn distance_is_symmetric_and_zero_on_diagonal() {
    let mdp = random_mdp(3);
    let mut rng = stream(3, 1);
    let other = perturbed_kernel(&mdp, 0.4, &mut rng).unwrap();
    let hist = random_history(&mdp, 10, &mut rng);
    assert_eq!(model_distance(&mdp, &mdp, &hist).unwrap(), 0.0);
    let d = model_distance(&mdp, &other, &hist).unwrap();
    assert!(d > 0.0);
    assert_eq!(d, model_distance(&other, &mdp, &hist).unwrap());
}

#[test]
fn radius_matches_hand_computation() {
    let cfg = VtrConfig {
        delta: 0.05,
        zeta: 0.1,
        episodes: 100,
        c_prime: 0.5,
        alpha_cover: Some(0.2),
    };
    assert_relative_eq!(radius_beta_vtr(10, &cfg, 8, 3).unwrap(), 55.6081989026267, max_relative = 1e-12);
}

#[test]
fn radius_is_constant_without_misspecification_or_cover() {
    let cfg = vtr_cfg(500, 1.0);
    let b = radius_beta_vtr(1, &cfg, 12, 4).unwrap();
    for k in [2, 50, 500] {
        assert_eq!(radius_beta_vtr(k, &cfg, 12, 4).unwrap(), b);
    }
    let doubled = radius_beta_vtr(1, &vtr_cfg(500, 2.0), 12, 4).unwrap();
    assert_relative_eq!(doubled, b * 2f64.sqrt(), max_relative = 1e-12);
    assert!(radius_beta_vtr(0, &cfg, 12, 4).is_err());
}

#[test]
fn default_cover_is_one_over_kh() {
    let implicit = VtrConfig {
        alpha_cover: None,
        ..vtr_cfg(50, 1.0)
    };
    let explicit = VtrConfig {
        alpha_cover: Some(1.0 / 150.0),
        ..vtr_cfg(50, 1.0)
    };
    assert_eq!(radius_beta_vtr(9, &implicit, 4, 3).unwrap(), radius_beta_vtr(9, &explicit, 4, 3).unwrap());
}

#[test]
fn incremental_choice_matches_full_rescan() {
    let mdp = random_mdp(4);
    let class = FiniteModelClass::around_truth(&mdp, 11, 0.1, 0.5, &mut stream(4, 3)).unwrap();
    let cfg = vtr_cfg(50, 1e-3);
    let mut agent = UcrlVtrAgent::new(cfg.clone(), class.clone()).unwrap();
    let mut rng = stream(4, 1);
    for k in 1..=50 {
        let beta = radius_beta_vtr(k, &cfg, 12, 3).unwrap();
        let fast = agent.choose().unwrap();
        let slow = optimistic_model(&class, agent.history(), beta).unwrap();
        assert_eq!(fast.model_id, slow.model_id, "episode {k}");
        assert_eq!(fast.center_id, slow.center_id);
        assert_eq!(fast.confidence_set, slow.confidence_set);
        for id in 0..12 {
            assert_relative_eq!(agent.losses()[id], vtr_loss(class.member(id), agent.history()).unwrap(), max_relative = 1e-9);
        }
        agent.step_episode(&mdp, &mut rng).unwrap();
    }
    for i in 0..12 {
        for j in 0..12 {
            let d = model_distance(class.member(i), class.member(j), agent.history()).unwrap();
            assert_relative_eq!(agent.distance(i, j), d, max_relative = 1e-9, epsilon = 1e-12);
        }
    }
}

#[test]
fn wide_radius_picks_the_most_optimistic_member() {
    let mdp = random_mdp(5);
    let mut rng = stream(5, 3);
    let a = perturbed_kernel(&mdp, 0.5, &mut rng).unwrap();
    let b = perturbed_kernel(&mdp, 0.5, &mut rng).unwrap();
    let members = vec![a.clone(), mdp.clone(), b.clone(), b.clone()];
    let values: Vec<f64> = members.iter().map(|m| exact_optimal_values(m).initial_value(m)).collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let expected = values.iter().position(|&v| v == best).unwrap();
    let class = FiniteModelClass::new(members).unwrap();
    let hist = random_history(&mdp, 5, &mut rng);
    let choice = optimistic_model(&class, &hist, 1e6).unwrap();
    assert_eq!(choice.confidence_set, vec![0, 1, 2, 3]);
    assert_eq!(choice.model_id, expected);
    assert!(choice.model_id != 3);
}

#[test]
fn zero_radius_keeps_only_the_center() {
    let mdp = random_mdp(6);
    let class = FiniteModelClass::around_truth(&mdp, 5, 0.2, 0.5, &mut stream(6, 3)).unwrap();
    let hist = random_history(&mdp, 20, &mut stream(6, 1));
    let choice = optimistic_model(&class, &hist, 0.0).unwrap();
    assert_eq!(choice.confidence_set, vec![choice.center_id]);
    assert_eq!(choice.model_id, choice.center_id);
}

#[test]
fn biased_rows_shift_toward_the_best_next_state() {
    let mdp = random_mdp(7);
    let zeta = 0.3;
    let biased = biased_kernel(&mdp, zeta).unwrap();
    let opt = exact_optimal_values(&mdp);
    let w = zeta / 3.0;
    for h in 0..3 {
        let next = &opt.v[h + 1];
        let mut best = 0;
        for s in 1..4 {
            if next[s] > next[best] {
                best = s;
            }
        }
        for s in 0..4 {
            for a in 0..2 {
                let (p, q) = (mdp.row(h, s, a), biased.row(h, s, a));
                if a == opt.policy.action(h, s) {
                    assert_eq!(p, q);
                    continue;
                }
                for x in 0..4 {
                    let want = (1.0 - w) * p[x] + if x == best { w } else { 0.0 };
                    assert_relative_eq!(q[x], want, epsilon = 1e-15);
                }
            }
        }
    }
    assert_eq!(biased.rewards(), mdp.rewards());
    assert!(biased_kernel(&mdp, 1.5).is_err());
}

#[test]
fn biased_model_keeps_the_optimal_value() {
    let mdp = random_mdp(8);
    let biased = biased_kernel(&mdp, 0.2).unwrap();
    let v = exact_optimal_values(&mdp);
    let vb = exact_optimal_values(&biased);
    assert!(vb.initial_value(&biased) >= v.initial_value(&mdp) - 1e-12);
}

#[test]
fn history_grows_one_episode_at_a_time() {
    let mdp = random_mdp(9);
    let class = FiniteModelClass::around_truth(&mdp, 3, 0.1, 0.3, &mut stream(9, 3)).unwrap();
    let mut agent = UcrlVtrAgent::new(vtr_cfg(10, 1.0), class).unwrap();
    let mut rng = stream(9, 1);
    for k in 1..=10 {
        agent.step_episode(&mdp, &mut rng).unwrap();
        assert_eq!(agent.history().len(), k);
        assert_eq!(agent.episodes_seen(), k);
        let last = agent.history().episodes.last().unwrap();
        assert_eq!(last.transitions.len(), 3);
        assert!(last.values[2].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let mdp = random_mdp(10);
    let run = || {
        let class = FiniteModelClass::around_truth(&mdp, 7, 0.1, 0.5, &mut stream(10, 3)).unwrap();
        let mut agent = UcrlVtrAgent::new(vtr_cfg(30, 1e-3), class).unwrap();
        train(&mut agent, &mdp, 30, &mut stream(10, 1));
        (agent.history().clone(), agent.losses().to_vec())
    };
    assert_eq!(run(), run());
}

#[test]
fn class_json_round_trip() {
    let mdp = random_mdp(11);
    let class = FiniteModelClass::around_truth(&mdp, 3, 0.1, 0.5, &mut stream(11, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("models.json");
    class.save(&path).unwrap();
    assert_eq!(FiniteModelClass::load(&path).unwrap().members(), class.members());
}

#[test]
fn class_members_must_share_a_shape() {
    let a = random_mdp(0);
    let b = build_random_env(3, 2, 3, &mut stream(0, 0)).unwrap();
    assert!(FiniteModelClass::new(vec![a, b]).is_err());
    assert!(FiniteModelClass::new(vec![]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn biased_error_is_within_budget(seed in any::<u64>(), zeta in 0.0f64..=1.0) {
        let mdp = random_mdp(seed);
        let biased = biased_kernel(&mdp, zeta).unwrap();
        let mut rng = stream(seed, 1);
        for _ in 0..10 {
            let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 3.0).collect();
            for h in 0..3 {
                for s in 0..4 {
                    for a in 0..2 {
                        let dp: f64 = biased.row(h, s, a).iter().zip(mdp.row(h, s, a)).zip(&v).map(|((x, y), w)| (x - y) * w).sum();
                        prop_assert!(dp.abs() <= zeta + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn perturbed_rows_are_distributions_within_weight(seed in any::<u64>(), weight in 0.0f64..=1.0) {
        let mdp = random_mdp(seed);
        let p = perturbed_kernel(&mdp, weight, &mut stream(seed, 5)).unwrap();
        for h in 0..3 {
            for s in 0..4 {
                for a in 0..2 {
                    let row = p.row(h, s, a);
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    let tv: f64 = 0.5 * row.iter().zip(mdp.row(h, s, a)).map(|(x, y)| (x - y).abs()).sum::<f64>();
                    prop_assert!(tv <= weight + 1e-12);
                }
            }
        }
    }

    #[test]
    fn loss_is_nonnegative_and_additive(seed in any::<u64>(), n in 0usize..10, m in 0usize..10) {
        let mdp = random_mdp(seed);
        let mut rng = stream(seed, 1);
        let a = random_history(&mdp, n, &mut rng);
        let b = random_history(&mdp, m, &mut rng);
        let mut both = a.clone();
        both.episodes.extend(b.episodes.clone());
        let (la, lb, lab) = (vtr_loss(&mdp, &a).unwrap(), vtr_loss(&mdp, &b).unwrap(), vtr_loss(&mdp, &both).unwrap());
        prop_assert!(la >= 0.0);
        prop_assert!((la + lb - lab).abs() <= 1e-9 * (1.0 + lab));
    }
}
