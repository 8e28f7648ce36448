//! Solver and response-graph results checked against independent dense
//! computations.

use nalgebra::{DMatrix, DVector};
use nashmod::game::{rock_paper_scissors, sample_random_game, GameSpec, MixedProfile, NormalFormGame};
use nashmod::response_graph::{alpha_rank, build_response_graph, stationary_distribution, ResponseGraph};

/// Left null vector of `C - I`, normalized to sum 1, from a dense LU solve
/// with one balance equation replaced by the normalization.
fn dense_stationary(graph: &ResponseGraph) -> Vec<f64> {
    let n = graph.num_nodes();
    let c = DMatrix::from_row_slice(n, n, graph.transition());
    let mut a = c.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).expect("irreducible chain");
    x.iter().copied().collect()
}

#[test]
fn power_iteration_matches_dense_solve_on_three_player_games() {
    for seed in 0..50 {
        let game = sample_random_game(&GameSpec::new(vec![2, 2, 2]), seed).unwrap();
        let graph = build_response_graph(&game, 1.0, 5.0).unwrap();
        let pi = stationary_distribution(&graph).unwrap();
        let oracle = dense_stationary(&graph);
        for (a, b) in pi.probs.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn power_iteration_matches_dense_solve_on_slow_chains() {
    // Strong selection makes downhill moves ~e^-50 likely; the plain
    // iteration alone would not settle.
    for seed in 0..10 {
        let game = sample_random_game(&GameSpec::new(vec![4, 4]), seed).unwrap();
        let graph = build_response_graph(&game, 5.0, 5.0).unwrap();
        let pi = stationary_distribution(&graph).unwrap();
        let oracle = dense_stationary(&graph);
        for (a, b) in pi.probs.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn rps_alpha_rank_is_uniform() {
    let game = rock_paper_scissors();
    let graph = build_response_graph(&game, 1.0, 5.0).unwrap();
    let oracle = dense_stationary(&graph);
    let (profile, _) = alpha_rank(&game, 1.0, 5.0).unwrap();
    for k in 0..2 {
        let marginal: Vec<f64> = (0..3)
            .map(|a| (0..3).map(|b| oracle[if k == 0 { a * 3 + b } else { b * 3 + a }]).sum())
            .collect();
        for (p, m) in profile.per_player[k].iter().zip(&marginal) {
            assert!((p - 1.0 / 3.0).abs() <= 1e-6);
            assert!((m - 1.0 / 3.0).abs() <= 1e-6);
        }
    }
}

/// All Nash equilibria of a nondegenerate 2x2 bimatrix game by support
/// enumeration: pure cells with no profitable deviation, plus the fully
/// mixed point where each player makes the other indifferent.
fn support_enumeration(game: &NormalFormGame) -> Vec<(f64, f64)> {
    let u = |k: usize, i: usize, j: usize| game.payoff(k, i * 2 + j);
    let mut out = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            if u(0, i, j) >= u(0, 1 - i, j) && u(1, i, j) >= u(1, i, 1 - j) {
                out.push((1.0 - i as f64, 1.0 - j as f64));
            }
        }
    }
    // p = P(row plays 0) equalizes the column player's actions.
    let den_p = u(1, 0, 0) - u(1, 1, 0) - u(1, 0, 1) + u(1, 1, 1);
    let den_q = u(0, 0, 0) - u(0, 0, 1) - u(0, 1, 0) + u(0, 1, 1);
    if den_p.abs() > 1e-12 && den_q.abs() > 1e-12 {
        let p = (u(1, 1, 1) - u(1, 1, 0)) / den_p;
        let q = (u(0, 1, 1) - u(0, 0, 1)) / den_q;
        if (0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q) {
            out.push((p, q));
        }
    }
    out
}

#[test]
fn support_enumeration_equilibria_have_zero_nash_conv() {
    let mut mixed = 0;
    for seed in 0..500 {
        let game = sample_random_game(&GameSpec::new(vec![2, 2]), seed).unwrap();
        let equilibria = support_enumeration(&game);
        assert!(!equilibria.is_empty(), "every 2x2 game has an equilibrium");
        for (p, q) in equilibria {
            if p > 0.0 && p < 1.0 {
                mixed += 1;
            }
            let profile = MixedProfile::new(vec![vec![p, 1.0 - p], vec![q, 1.0 - q]]).unwrap();
            let nc = game.nash_conv(&profile).unwrap();
            assert!(nc <= 1e-6, "seed {seed}: ({p}, {q}) has NashConv {nc}");
        }
    }
    assert!(mixed > 20, "only {mixed} mixed equilibria exercised");
}

#[test]
fn non_equilibria_have_positive_nash_conv() {
    for seed in 0..200 {
        let game = sample_random_game(&GameSpec::new(vec![2, 2]), seed).unwrap();
        let equilibria = support_enumeration(&game);
        let probe = (0.37, 0.81);
        if equilibria.iter().all(|&(p, q)| (p - probe.0).abs() + (q - probe.1).abs() > 1e-3) {
            let profile = MixedProfile::new(vec![vec![probe.0, 1.0 - probe.0], vec![probe.1, 1.0 - probe.1]]).unwrap();
            assert!(game.nash_conv(&profile).unwrap() > 1e-9, "seed {seed}");
        }
    }
}
