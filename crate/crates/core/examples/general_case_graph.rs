//! One graph-encoded policy for games of every size: trains briefly on
//! mixed 2- and 3-player games, then evaluates the same checkpoint on each
//! shape separately.
//!
//! cargo run --release --example general_case_graph

use std::sync::Arc;

use nashmod::env::Environment;
use nashmod::game::{sample_random_game, GameSpec};
use nashmod::harness::{Case, ExperimentConfig, Workbench};
use nashmod::nn::{ActorCritic, NetworkConfig};
use nashmod::ppo::{greedy_scores, train, EvalScores, GameEpisodes, PreparedGame};

fn main() -> nashmod::Result<()> {
    let mut config = ExperimentConfig {
        case: Case::General,
        train_games: 40,
        test_games: 20,
        horizon: 10,
        ..ExperimentConfig::default()
    };
    config.ppo.total_env_steps = 4_000;
    config.ppo.ppo_epochs = 4;
    let bench = Workbench::new(&config)?;
    let ppo = config.ppo_config(0);
    let mut envs = (0..ppo.num_envs)
        .map(|i| GameEpisodes::new(Arc::clone(&bench.env), bench.network.clone(), Arc::clone(&bench.train), i as u64))
        .collect::<nashmod::Result<Vec<_>>>()?;
    let report = train(ActorCritic::new(bench.network.clone())?, &mut envs, &ppo, |model| {
        let (train, test) = bench.greedy(model)?;
        println!("train {:.4}  test {:.4}", train.mean, test.mean);
        Ok(Some(EvalScores { train: train.mean, test: test.mean }))
    })?;

    let model = report.best_model;
    let env = Environment::new(config.episode_config())?;
    let network: &NetworkConfig = model.config();
    for players in [2u32, 3] {
        for code in 0..3usize.pow(players) {
            let counts: Vec<usize> = (0..players).map(|p| 2 + code / 3usize.pow(p) % 3).collect();
            let games = (0..5u64)
                .map(|s| sample_random_game(&GameSpec::new(counts.clone()), 10_000 + 100 * code as u64 + s))
                .collect::<nashmod::Result<Vec<_>>>()?;
            let prepared = PreparedGame::prepare_all(games, &env, network)?;
            let scores = greedy_scores(&model, &env, &prepared)?;
            println!("{counts:?}: mean score {:.4} ({} excluded)", scores.mean, scores.excluded);
        }
    }
    Ok(())
}
