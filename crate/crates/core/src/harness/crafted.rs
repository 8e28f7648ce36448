//! Hand-built 2x2 games for the payoff-shift sweep.

use crate::error::{Error, Result};
use crate::game::{matching_pennies, NormalFormGame};

pub const CRAFTED_IDS: [&str; 3] = ["asymmetric_pennies", "matching_pennies", "battle_of_sexes"];

/// Zero-sum pennies where matching on heads pays double. Every solver in
/// the crate stops short of its mixed equilibrium here, and shifting the
/// heads-heads payoffs helps each of them.
pub fn asymmetric_pennies() -> NormalFormGame {
    NormalFormGame::bimatrix(&[vec![2.0, -1.0], vec![-1.0, 1.0]], &[vec![-2.0, 1.0], vec![1.0, -1.0]])
        .expect("valid 2x2 game")
}

/// Coordination game with two pure equilibria; low-pressure alpha-rank
/// spreads mass across all four joint actions.
pub fn battle_of_sexes() -> NormalFormGame {
    NormalFormGame::bimatrix(&[vec![2.0, 0.0], vec![0.0, 1.0]], &[vec![1.0, 0.0], vec![0.0, 2.0]]).expect("valid 2x2 game")
}

pub fn crafted_game(id: &str) -> Result<NormalFormGame> {
    match id {
        "asymmetric_pennies" => Ok(asymmetric_pennies()),
        "matching_pennies" => Ok(matching_pennies()),
        "battle_of_sexes" => Ok(battle_of_sexes()),
        other => Err(Error::invalid(format!(
            "unknown crafted game {other:?}; known: {}",
            CRAFTED_IDS.join(", ")
        ))),
    }
}
