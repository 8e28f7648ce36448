use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nashmod::game::NormalFormGame;
use nashmod::harness::{
    cmd_baseline, cmd_eval, cmd_grad_check, cmd_sample, cmd_solver_bench, cmd_sweep, cmd_train, crafted_game, Case,
    ExperimentConfig, GameRecord,
};
use nashmod::solvers::SolverKind;

#[derive(Parser)]
#[command(name = "nashmod", version, about = "Learn payoff modifications that help inexact equilibrium solvers")]
struct Cli {
    /// TOML experiment config; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed (also the dataset seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// alpha_rank, ce, fp or prd.
    #[arg(long, global = true)]
    solver: Option<SolverKind>,
    /// simple or general.
    #[arg(long, global = true)]
    case: Option<Case>,
    /// 200/50 games, horizon 20, 1e5 environment steps.
    #[arg(long, global = true)]
    desk_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train and test game datasets.
    Sample,
    /// Score the uniform random policy.
    Baseline,
    /// Train one policy per seed.
    Train,
    /// Score saved checkpoints on both dataset splits.
    Eval {
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// NashConv over a 41x41 grid of payoff shifts on a 2x2 game.
    Sweep {
        /// Crafted game id or a JSON file holding one game record.
        #[arg(long, default_value = "asymmetric_pennies")]
        game: String,
    },
    /// Finite-difference check of the network gradients.
    GradCheck,
    /// Unmodified-game NashConv and timing of every solver.
    SolverBench {
        #[arg(long, default_value_t = 50)]
        games: usize,
    },
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_toml_file(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.desk_scale {
        config = config.desk_scale();
    }
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
        config.dataset_seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(solver) = cli.solver {
        if config.solver_config.as_ref().is_some_and(|c| c.kind() != solver) {
            config.solver_config = None;
        }
        config.solver = solver;
    }
    if let Some(case) = cli.case {
        config.case = case;
    }
    config.validate()?;
    Ok(config)
}

fn load_sweep_game(spec: &str) -> Result<(String, NormalFormGame)> {
    if let Ok(game) = crafted_game(spec) {
        return Ok((spec.to_string(), game));
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        bail!("{spec} is neither a crafted game id nor a file");
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let record: GameRecord = serde_json::from_str(text.trim()).with_context(|| format!("parsing {}", path.display()))?;
    Ok((record.id.clone(), record.to_game()?))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = resolve(&cli)?;
    match &cli.command {
        Command::Sample => {
            let d = cmd_sample(&config)?;
            println!("wrote {} train and {} test games to {}", d.train.len(), d.test.len(), config.out_dir.display());
        }
        Command::Baseline => {
            let r = cmd_baseline(&config)?;
            for row in &r.rows {
                println!("seed {:>3} {:5} score {:.4} ({} games, {} excluded)", row.seed, row.split, row.mean_score, row.games, row.excluded);
            }
            println!("test {:.4} ({:.4})", r.test.mean, r.test.std);
        }
        Command::Train => {
            let s = cmd_train(&config)?;
            for run in &s.runs {
                println!(
                    "seed {:>3} best test {:.4} (train {:.4}) at {} steps, {:.0}s",
                    run.seed, run.best_test_score, run.best_train_score, run.best_env_steps, run.seconds
                );
            }
            println!("test {:.4} ({:.4})  train {:.4} ({:.4})", s.test.mean, s.test.std, s.train.mean, s.train.std);
        }
        Command::Eval { checkpoints } => {
            for row in cmd_eval(&config, checkpoints)? {
                println!("{} {:5} {:.4} ({} excluded)", row.checkpoint, row.split, row.mean_score, row.excluded);
            }
        }
        Command::Sweep { game } => {
            let (name, game) = load_sweep_game(game)?;
            let s = cmd_sweep(&config, &name, &game)?;
            println!(
                "{} / {}: unmodified {:.6}, minimum {:.6} at ({:.1}, {:.1})",
                s.game, s.solver, s.unmodified_nash_conv, s.min_nash_conv, s.argmin_delta1, s.argmin_delta2
            );
        }
        Command::GradCheck => {
            let rows = cmd_grad_check(&config, config.seeds[0])?;
            for row in &rows {
                println!("{:26} max rel error {:.2e} over {} entries", row.target, row.max_rel_error, row.entries);
            }
        }
        Command::SolverBench { games } => {
            for row in cmd_solver_bench(&config, *games)? {
                println!(
                    "{:10} mean NashConv {:.4}  max {:.4}  {:.3} ms/solve",
                    row.solver, row.mean_nash_conv, row.max_nash_conv, row.mean_solve_ms
                );
            }
        }
    }
    Ok(())
}
