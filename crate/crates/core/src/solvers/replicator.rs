use crate::error::{Error, Result};
use crate::game::{MixedProfile, NormalFormGame};

use super::projection::{exploration_lower_bound, project_to_exploration_simplex};
use super::Solution;

/// Projected replicator dynamics: explicit Euler steps of the replicator
/// equation, each followed by projection onto the exploration simplex
/// `{pi : pi(a) >= gamma / (|A| + 1)}`. Starts uniform and returns the final
/// iterate.
pub fn solve_prd(game: &NormalFormGame, iterations: usize, dt: f64, gamma: f64) -> Result<Solution> {
    if iterations == 0 {
        return Err(Error::invalid("PRD needs at least one iteration"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("PRD step size must be positive, got {dt}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("PRD exploration must lie in [0, 1), got {gamma}")));
    }
    let bounds: Vec<f64> = game
        .action_counts()
        .iter()
        .map(|&n| exploration_lower_bound(gamma, n))
        .collect();
    let mut profile = MixedProfile::uniform(game.action_counts());
    for _ in 0..iterations {
        let values: Vec<Vec<f64>> = (0..game.num_players())
            .map(|k| game.action_values_unchecked(&profile, k))
            .collect();
        for (k, strategy) in profile.per_player.iter_mut().enumerate() {
            let u = &values[k];
            let mean: f64 = u.iter().zip(strategy.iter()).map(|(v, p)| v * p).sum();
            let stepped: Vec<f64> = strategy
                .iter()
                .zip(u)
                .map(|(&p, &v)| p + dt * p * (v - mean))
                .collect();
            *strategy = project_to_exploration_simplex(&stepped, bounds[k])?;
        }
    }
    Ok(Solution {
        profile,
        joint: None,
        iterations,
    })
}
