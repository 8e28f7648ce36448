use crate::error::{Error, Result};
use crate::game::{argmax_lowest, renormalize, MixedProfile, NormalFormGame};

use super::Solution;

/// Simultaneous fictitious play from uniform beliefs.
///
/// The initial uniform profile counts as the first entry of each player's
/// running average; every round each player best-responds to the opponents'
/// current averages and the averages absorb those pure responses.
pub fn solve_fictitious_play(game: &NormalFormGame, iterations: usize) -> Result<Solution> {
    if iterations == 0 {
        return Err(Error::invalid("fictitious play needs at least one iteration"));
    }
    let mut average = MixedProfile::uniform(game.action_counts());
    for t in 1..=iterations {
        let responses: Vec<usize> = (0..game.num_players())
            .map(|k| argmax_lowest(&game.action_values_unchecked(&average, k)).0)
            .collect();
        let keep = t as f64 / (t + 1) as f64;
        let add = 1.0 / (t + 1) as f64;
        for (strategy, &br) in average.per_player.iter_mut().zip(&responses) {
            for (a, p) in strategy.iter_mut().enumerate() {
                *p = *p * keep + if a == br { add } else { 0.0 };
            }
            renormalize(strategy);
        }
    }
    Ok(Solution {
        profile: average,
        joint: None,
        iterations,
    })
}
