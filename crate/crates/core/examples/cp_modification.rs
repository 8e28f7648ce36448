//! Decomposes a payoff tensor, then walks one episode: each step adds a
//! weighted reconstruction to the game and re-solves it.
//!
//! cargo run --release --example cp_modification

use nashmod::decomposition::{cp_decompose, CpConfig};
use nashmod::env::{EpisodeConfig, Environment};
use nashmod::game::{sample_random_game, GameSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nashmod::Result<()> {
    let game = sample_random_game(&GameSpec::new(vec![5, 5]), 7)?;
    for rank in [1, 5, 10, 20] {
        let cp = cp_decompose(&game, &CpConfig { rank, ..CpConfig::default() })?;
        println!(
            "rank {rank:2}: relative error {:.4} after {} sweeps",
            cp.relative_error(),
            cp.error_history().len()
        );
    }

    let env = Environment::new(EpisodeConfig { horizon: 10, ..EpisodeConfig::default() })?;
    let mut state = env.reset(game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("\nunmodified NashConv {:.4}", state.baseline_nc());
    let mut total = 0.0;
    loop {
        let action: Vec<f64> = (0..env.config().rank()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let step = env.step(&mut state, &action)?;
        total += step.reward;
        println!(
            "step {:2}: NashConv {:.4}  reward {:+.4}  best so far {:.4}",
            state.step_index(),
            step.nash_conv,
            step.reward,
            step.min_nash_conv
        );
        if step.done {
            break;
        }
    }
    let trace = state.nc_trace();
    println!("sum of rewards {total:.6} = first minus last NashConv {:.6}", trace[0] - trace[trace.len() - 1]);
    println!("improvement score {:.4}", state.improvement_score());
    Ok(())
}
