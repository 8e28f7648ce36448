use crate::error::{Error, Result};
use crate::game::{renormalize, JointDistribution, MixedProfile, NormalFormGame};

use super::Solution;

/// Full-width external regret matching.
///
/// Each round every player plays proportionally to its positive cumulative
/// regret (uniform when none is positive) and then adds the expected regret
/// `u(a, sigma^{-k}) - u(sigma)` for every action. Returns the time-averaged
/// strategies and the average of the per-round product distributions.
pub fn solve_regret_matching(game: &NormalFormGame, iterations: usize) -> Result<Solution> {
    if iterations == 0 {
        return Err(Error::invalid("regret matching needs at least one iteration"));
    }
    let mut state = RegretMatching::new(game);
    for _ in 0..iterations {
        state.step(game);
    }
    Ok(state.into_solution())
}

pub(crate) struct RegretMatching {
    regrets: Vec<Vec<f64>>,
    strategy_sum: Vec<Vec<f64>>,
    joint_sum: Vec<f64>,
    rounds: usize,
}

impl RegretMatching {
    pub(crate) fn new(game: &NormalFormGame) -> Self {
        let zeros: Vec<Vec<f64>> = game.action_counts().iter().map(|&n| vec![0.0; n]).collect();
        Self {
            regrets: zeros.clone(),
            strategy_sum: zeros,
            joint_sum: vec![0.0; game.num_joint()],
            rounds: 0,
        }
    }

    fn current(&self) -> MixedProfile {
        MixedProfile {
            per_player: self
                .regrets
                .iter()
                .map(|r| {
                    let positive: Vec<f64> = r.iter().map(|&x| x.max(0.0)).collect();
                    let total: f64 = positive.iter().sum();
                    if total > 0.0 {
                        positive.iter().map(|x| x / total).collect()
                    } else {
                        vec![1.0 / r.len() as f64; r.len()]
                    }
                })
                .collect(),
        }
    }

    pub(crate) fn step(&mut self, game: &NormalFormGame) {
        let sigma = self.current();
        for (k, regret) in self.regrets.iter_mut().enumerate() {
            let u = game.action_values_unchecked(&sigma, k);
            let value: f64 = u.iter().zip(&sigma.per_player[k]).map(|(a, b)| a * b).sum();
            for (r, v) in regret.iter_mut().zip(&u) {
                *r += v - value;
            }
        }
        for (sum, s) in self.strategy_sum.iter_mut().zip(&sigma.per_player) {
            for (a, b) in sum.iter_mut().zip(s) {
                *a += b;
            }
        }
        for (a, b) in self.joint_sum.iter_mut().zip(sigma.to_joint().probs) {
            *a += b;
        }
        self.rounds += 1;
    }

    /// Largest per-player cumulative external regret divided by the number
    /// of rounds played.
    #[cfg(test)]
    pub(crate) fn average_regret(&self) -> f64 {
        self.regrets
            .iter()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .fold(0.0, f64::max)
            / self.rounds.max(1) as f64
    }

    pub(crate) fn into_solution(self) -> Solution {
        let t = self.rounds as f64;
        let per_player = self
            .strategy_sum
            .into_iter()
            .map(|mut s| {
                s.iter_mut().for_each(|x| *x /= t);
                renormalize(&mut s);
                s
            })
            .collect();
        let mut joint = self.joint_sum;
        joint.iter_mut().for_each(|x| *x /= t);
        renormalize(&mut joint);
        Solution {
            profile: MixedProfile { per_player },
            joint: Some(JointDistribution { probs: joint }),
            iterations: self.rounds,
        }
    }
}
