//! Trains a policy on 2-player 5-action games with alpha-rank and compares
//! it with the random policy on held-out games. A scaled-down version of
//! the desk-scale run; pass `--full` for 200/50 games and 1e5 steps.
//!
//! cargo run --release --example train_simple [-- --full]

use nashmod::harness::{baseline_with, train_with, ExperimentConfig, Workbench};

fn main() -> nashmod::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let mut config = ExperimentConfig::default().desk_scale();
    config.out_dir = std::env::temp_dir().join("nashmod_train_simple");
    config.seeds = vec![0];
    if !full {
        config.train_games = 60;
        config.test_games = 20;
        config.ppo.total_env_steps = 20_000;
    }
    std::fs::create_dir_all(&config.out_dir).map_err(|e| nashmod::Error::Io {
        path: config.out_dir.clone(),
        source: e,
    })?;
    let bench = Workbench::new(&config)?;
    let baseline = baseline_with(&config, &bench)?;
    println!("random policy test score {:.4}", baseline.test.mean);
    let summary = train_with(&config, &bench)?;
    for run in &summary.runs {
        println!(
            "seed {}: best test score {:.4} at {} steps (train {:.4}); log {}",
            run.seed,
            run.best_test_score,
            run.best_env_steps,
            run.best_train_score,
            run.metrics.display()
        );
    }
    Ok(())
}
