//! Runs the four inexact solvers on random games and reports how far each
//! solution is from equilibrium.
//!
//! cargo run --release --example solver_comparison

use std::time::Instant;

use nashmod::game::{sample_random_game, GameSpec};
use nashmod::solvers::{solve, SolverKind};

fn main() -> nashmod::Result<()> {
    for counts in [vec![5, 5], vec![3, 3, 3]] {
        println!("games of shape {counts:?}");
        let games: Vec<_> = (0..20)
            .map(|seed| sample_random_game(&GameSpec::new(counts.clone()), seed))
            .collect::<Result<_, _>>()?;
        for kind in SolverKind::ALL {
            let config = kind.default_config();
            let start = Instant::now();
            let mut total = 0.0;
            let mut ce_regret = 0.0;
            for game in &games {
                let solution = solve(game, &config)?;
                total += game.nash_conv(&solution.profile)?;
                if let Some(joint) = &solution.joint {
                    ce_regret += game.ce_regret(joint)?;
                }
            }
            let n = games.len() as f64;
            print!("  {:10} NashConv {:.4}  {:7.3} ms/game", kind.name(), total / n, start.elapsed().as_secs_f64() * 1e3 / n);
            if kind != SolverKind::FictitiousPlay && kind != SolverKind::Prd {
                print!("  ce_regret {:.4}", ce_regret / n);
            }
            println!();
        }
    }
    Ok(())
}
