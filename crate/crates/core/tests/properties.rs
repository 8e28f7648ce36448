//! Property tests over random games, factors and traces.

use nashmod::decomposition::{apply_modification, CpFactors};
use nashmod::env::improvement_score;
use nashmod::game::{sample_random_game, GameSpec, NormalFormGame};
use nashmod::response_graph::build_response_graph;
use nashmod::solvers::{solve, SolverKind};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        prop::collection::vec(2usize..=4, 2),
        prop::collection::vec(2usize..=3, 3),
    ]
}

fn game() -> impl Strategy<Value = NormalFormGame> {
    shape().prop_flat_map(|counts| {
        let len = counts.len() * counts.iter().product::<usize>();
        prop::collection::vec(-100.0f64..100.0, len).prop_map(move |p| NormalFormGame::new(counts.clone(), p).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn response_graph_rows_are_stochastic(g in game(), alpha in 0.01f64..50.0, m in 1.5f64..60.0) {
        let graph = build_response_graph(&g, alpha, m).unwrap();
        let n = graph.num_nodes();
        for i in 0..n {
            let row = &graph.transition()[i * n..(i + 1) * n];
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&c| (0.0..=1.0).contains(&c)));
            for (j, &c) in row.iter().enumerate() {
                let differ = g.joint_actions(i).iter().zip(g.joint_actions(j)).filter(|(a, b)| **a != *b).count();
                if differ > 1 {
                    prop_assert_eq!(c, 0.0);
                }
            }
        }
    }

    #[test]
    fn normalization_is_idempotent(g in game()) {
        let once = g.normalize_payoffs();
        let twice = once.normalize_payoffs();
        prop_assert!(once.payoffs().iter().all(|x| (-5.0..=5.0).contains(x)));
        for (a, b) in once.payoffs().iter().zip(twice.payoffs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn reconstruction_is_linear(
        counts in shape(),
        rank in 1usize..6,
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![counts.len()];
        dims.extend(&counts);
        let factors = dims.iter().map(|&d| (0..d * rank).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let cp = CpFactors::from_factors(dims, rank, factors).unwrap();
        let x: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (rx, ry, rm) = (cp.reconstruct(&x).unwrap(), cp.reconstruct(&y).unwrap(), cp.reconstruct(&mix).unwrap());
        for i in 0..rm.len() {
            prop_assert!((rm[i] - (a * rx[i] + b * ry[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn modified_games_stay_in_range(seed in any::<u64>(), w in prop::collection::vec(-1.0f64..1.0, 4)) {
        let g = sample_random_game(&GameSpec::new(vec![3, 3]), seed).unwrap();
        let cp = nashmod::decomposition::cp_decompose(&g, &nashmod::decomposition::CpConfig { rank: 4, ..Default::default() }).unwrap();
        let next = apply_modification(&g, &cp, &w, 5.0).unwrap();
        prop_assert_eq!(next.action_counts(), g.action_counts());
        prop_assert!(next.payoffs().iter().all(|x| (-5.0..=5.0).contains(x)));
    }

    #[test]
    fn improvement_score_is_bounded(trace in prop::collection::vec(0.0f64..20.0, 1..30)) {
        let s = improvement_score(&trace, trace[0]);
        prop_assert!((0.0..=1.0).contains(&s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(25))]

    #[test]
    fn solvers_return_distributions(seed in any::<u64>(), counts in shape()) {
        let g = sample_random_game(&GameSpec::new(counts), seed).unwrap();
        for kind in SolverKind::ALL {
            let solution = solve(&g, &kind.default_config()).unwrap();
            prop_assert!(solution.profile.is_valid(), "{kind}");
            if let Some(joint) = &solution.joint {
                prop_assert!(joint.is_valid());
            }
            prop_assert!(g.nash_conv(&solution.profile).unwrap() >= 0.0);
        }
    }
}
