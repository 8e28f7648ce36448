//! Experiment orchestration: configs, datasets and the command
//! implementations used by the CLI and the examples.

mod commands;
mod config;
mod crafted;
mod dataset;
mod gradcheck;

pub use commands::{
    baseline_with, cmd_baseline, cmd_eval, cmd_grad_check, cmd_sample, cmd_solver_bench, cmd_sweep, cmd_train, load_dataset,
    train_with, BaselineReport, BenchRow, EvalRow, GradCheckRow, SeedRun, SeedStats, SplitRow, SweepSummary, TrainSummary,
    Workbench,
};
pub use config::{Case, ExperimentConfig};
pub use crafted::{asymmetric_pennies, battle_of_sexes, crafted_game, CRAFTED_IDS};
pub use dataset::{game_spec, read_jsonl, sample_dataset, sample_game, write_jsonl, Dataset, GameRecord};
pub use gradcheck::grad_check_suite;
