//! Alpha-rank response graph over joint pure actions and its stationary
//! distribution.
//!
//! Two joint actions are adjacent when exactly one player's action differs.
//! The transition from `a` to a neighbor `a'` (player `k` switched) depends
//! on that player's payoff gain `d = M^k(a') - M^k(a)`:
//!
//! ```text
//! C(a, a') = eta * (1 - exp(-alpha d)) / (1 - exp(-alpha m d))   if d != 0
//!          = eta / m                                             otherwise
//! ```
//!
//! with `eta = 1 / sum_k (|A^k| - 1)`; the self-loop takes the remaining mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{JointDistribution, MixedProfile, NormalFormGame};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_POPULATION: f64 = 5.0;

/// Payoff gaps below this magnitude take the equal-payoff branch.
pub const EQUAL_PAYOFF_TOL: f64 = 1e-10;
/// Exponent arguments are clamped to this magnitude.
pub const EXP_CLAMP: f64 = 500.0;

pub const STATIONARY_TOL: f64 = 1e-10;
pub const STATIONARY_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseGraph {
    action_counts: Vec<usize>,
    /// Row-stochastic `num_nodes x num_nodes`, row-major.
    transition: Vec<f64>,
    alpha: f64,
    population: f64,
}

impl ResponseGraph {
    /// Wraps an explicit row-stochastic matrix. `action_counts` fixes the
    /// node indexing; a single-player chain can use `[n]`.
    pub fn from_transition(action_counts: Vec<usize>, transition: Vec<f64>) -> Result<Self> {
        let n: usize = action_counts.iter().product();
        if transition.len() != n * n {
            return Err(Error::shape(format!(
                "transition matrix has {} entries, {} nodes need {}",
                transition.len(),
                n,
                n * n
            )));
        }
        for (i, row) in transition.chunks(n).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {i} is not stochastic (sum {total})")));
            }
        }
        Ok(Self {
            action_counts,
            transition,
            alpha: f64::NAN,
            population: f64::NAN,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.action_counts.iter().product()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.num_nodes() + to]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn population(&self) -> f64 {
        self.population
    }

    /// `(C + C^T) / 2`, the undirected edge weights used for message passing.
    pub fn symmetrized(&self) -> Vec<f64> {
        let n = self.num_nodes();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = 0.5 * (self.transition[i * n + j] + self.transition[j * n + i]);
            }
        }
        out
    }

    /// Left multiplication `pi C`.
    pub fn propagate(&self, pi: &[f64], out: &mut [f64]) {
        let n = self.num_nodes();
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in self.transition.chunks(n).enumerate() {
            let p = pi[i];
            if p == 0.0 {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(row) {
                *o += p * c;
            }
        }
    }
}

/// Probability that a mutant with payoff gain `gain` takes over, scaled by
/// `eta`. Evaluated in a form whose exponents are never positive.
pub fn fixation_probability(gain: f64, alpha: f64, population: f64, eta: f64) -> f64 {
    if gain.abs() < EQUAL_PAYOFF_TOL {
        return eta / population;
    }
    let x = alpha * gain;
    if x > 0.0 {
        let num = -(-x.min(EXP_CLAMP)).exp_m1();
        let den = -(-(population * x).min(EXP_CLAMP)).exp_m1();
        eta * num / den
    } else {
        // (e^{y} - 1) / (e^{m y} - 1) = e^{(1-m) y} (1 - e^{-y}) / (1 - e^{-m y}), y = -x > 0
        let y = -x;
        let lead = ((1.0 - population) * y).max(-EXP_CLAMP).exp();
        let num = -(-y.min(EXP_CLAMP)).exp_m1();
        let den = -(-(population * y).min(EXP_CLAMP)).exp_m1();
        eta * lead * num / den
    }
}

pub fn build_response_graph(game: &NormalFormGame, alpha: f64, population: f64) -> Result<ResponseGraph> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("selection pressure must be positive, got {alpha}")));
    }
    if !(population > 1.0) || !population.is_finite() {
        return Err(Error::invalid(format!("population size must exceed 1, got {population}")));
    }
    let counts = game.action_counts();
    let n = game.num_joint();
    let denom: usize = counts.iter().map(|&c| c - 1).sum();
    let mut transition = vec![0.0; n * n];
    if denom == 0 {
        transition[0] = 1.0;
    } else {
        let eta = 1.0 / denom as f64;
        let strides = game.strides();
        for from in 0..n {
            let row = &mut transition[from * n..(from + 1) * n];
            let mut outgoing = 0.0;
            for (k, (&count, &stride)) in counts.iter().zip(&strides).enumerate() {
                let own = (from / stride) % count;
                let base = from - own * stride;
                let here = game.payoff(k, from);
                for other in (0..count).filter(|&b| b != own) {
                    let to = base + other * stride;
                    let p = fixation_probability(game.payoff(k, to) - here, alpha, population, eta);
                    row[to] = p;
                    outgoing += p;
                }
            }
            row[from] = (1.0 - outgoing).max(0.0);
        }
    }
    Ok(ResponseGraph {
        action_counts: counts.to_vec(),
        transition,
        alpha,
        population,
    })
}

/// Squarings after which `C^(2^k)` has reached its limit in floating point.
const MAX_SQUARINGS: usize = 64;

/// Stationary distribution of the response graph, accurate to 1e-10 in L1.
pub fn stationary_distribution(graph: &ResponseGraph) -> Result<JointDistribution> {
    stationary_distribution_with(graph, STATIONARY_TOL, STATIONARY_MAX_ITERS)
}

/// Power iteration on the matrix rather than the vector: the lazy chain
/// `(C + I) / 2`, which has the same stationary distribution and no
/// periodicity, is squared until every row of `C^(2^k)` lies within `tol` (L1) of every other.
/// Every row is then within `tol` of the stationary distribution, whatever
/// the mixing time, which a small step-to-step change of `pi C` does not
/// guarantee on slow chains. Each squaring counts as one iteration against
/// `max_iters`.
pub fn stationary_distribution_with(
    graph: &ResponseGraph,
    tol: f64,
    max_iters: usize,
) -> Result<JointDistribution> {
    let n = graph.num_nodes();
    let mut power: Vec<f64> = graph.transition.iter().map(|x| 0.5 * x).collect();
    for i in 0..n {
        power[i * n + i] += 0.5;
    }
    let mut iterations = 0;
    loop {
        let residual = row_spread(&power, n);
        if residual <= tol {
            let mut pi = vec![0.0; n];
            for row in power.chunks_exact(n) {
                pi.iter_mut().zip(row).for_each(|(p, &x)| *p += x);
            }
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|p| *p /= total);
            return Ok(JointDistribution { probs: pi });
        }
        if iterations >= max_iters.min(MAX_SQUARINGS) {
            return Err(Error::NotConverged { iterations, residual });
        }
        power = square_stochastic(&power, n);
        iterations += 1;
    }
}

/// `sum_j (max_i P_ij - min_i P_ij)`, an upper bound on the L1 distance
/// between any two rows.
fn row_spread(p: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| {
            let column = (0..n).map(|i| p[i * n + j]);
            let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            hi - lo
        })
        .sum()
}

/// `P * P` with each row renormalized to sum to one.
fn square_stochastic(p: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let a = p[i * n + k];
            if a == 0.0 {
                continue;
            }
            for (o, &b) in row.iter_mut().zip(&p[k * n..(k + 1) * n]) {
                *o += a * b;
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    out
}

/// Alpha-rank: per-player marginals of the response graph's stationary
/// distribution, plus the distribution itself.
pub fn alpha_rank(game: &NormalFormGame, alpha: f64, population: f64) -> Result<(MixedProfile, JointDistribution)> {
    let graph = build_response_graph(game, alpha, population)?;
    let joint = stationary_distribution(&graph)?;
    let profile = game.marginalize(&joint)?;
    Ok((profile, joint))
}

pub fn alpha_rank_solve(game: &NormalFormGame, alpha: f64, population: f64) -> Result<MixedProfile> {
    alpha_rank(game, alpha, population).map(|(profile, _)| profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::rock_paper_scissors;

    #[test]
    fn rps_edge_value() {
        let g = rock_paper_scissors();
        let graph = build_response_graph(&g, 1.0, 5.0).unwrap();
        let rr = g.joint_index(&[0, 0]);
        let pr = g.joint_index(&[1, 0]);
        let expected = 0.25 * (1.0 - (-1.0f64).exp()) / (1.0 - (-5.0f64).exp());
        assert!((graph.entry(rr, pr) - expected).abs() < 1e-12);
        assert!((expected - 0.15910).abs() < 1e-5);
    }

    #[test]
    fn rps_equal_payoff_edge() {
        // RPS has no tied neighbors, so check the branch at its eta directly
        assert_eq!(fixation_probability(0.0, 1.0, 5.0, 0.25), 0.05);
        let g = rock_paper_scissors();
        let graph = build_response_graph(&g, 1.0, 5.0).unwrap();
        let rr = g.joint_index(&[0, 0]);
        assert_eq!(graph.entry(rr, g.joint_index(&[1, 1])), 0.0);
    }

    #[test]
    fn constant_game_graph() {
        let g = NormalFormGame::constant(vec![2, 2], 1.0).unwrap();
        let graph = build_response_graph(&g, 1.0, 5.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = graph.entry(i, j);
                if i == j {
                    assert!((e - 0.8).abs() < 1e-15, "self loop {e}");
                } else if i ^ j == 3 {
                    assert_eq!(e, 0.0);
                } else {
                    assert!((e - 0.1).abs() < 1e-15);
                }
            }
        }
        let pi = stationary_distribution(&graph).unwrap();
        assert!(pi.probs.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn extreme_gains_do_not_overflow() {
        for &gain in &[-1e6, -50.0, -1e-9, 1e-9, 50.0, 1e6] {
            let p = fixation_probability(gain, 100.0, 50.0, 0.5);
            assert!(p.is_finite() && (0.0..=0.5).contains(&p), "gain {gain} -> {p}");
        }
        assert!(fixation_probability(-1e6, 100.0, 50.0, 0.5) < 1e-200);
        assert!((fixation_probability(1e6, 100.0, 50.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn branches_agree_near_tolerance() {
        let eq = fixation_probability(0.0, 1.0, 5.0, 1.0);
        let near = fixation_probability(2e-10, 1.0, 5.0, 1.0);
        assert!((eq - near).abs() < 1e-9);
    }

    #[test]
    fn bad_parameters() {
        let g = rock_paper_scissors();
        assert!(build_response_graph(&g, 0.0, 5.0).is_err());
        assert!(build_response_graph(&g, 1.0, 1.0).is_err());
    }

    #[test]
    fn doubly_stochastic_two_node_chain() {
        let graph = ResponseGraph::from_transition(vec![2], vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let pi = stationary_distribution(&graph).unwrap();
        assert_eq!(pi.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn non_convergence_reports_residual() {
        // periodic chains still settle through the lazy chain
        let c = vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let graph = ResponseGraph::from_transition(vec![3], c).unwrap();
        let pi = stationary_distribution(&graph).unwrap();
        assert!(pi.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-10));
        let c = vec![0.0, 1.0, 1.0, 0.0];
        let graph = ResponseGraph::from_transition(vec![2], c).unwrap();
        assert!(stationary_distribution(&graph).is_ok());
        // two closed classes: the powers never forget the start
        let graph = ResponseGraph::from_transition(vec![2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        match stationary_distribution_with(&graph, 1e-300, 50) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 50);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
