//! The operations behind each CLI subcommand. Every command writes its
//! outputs under the configured output directory and records a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::dataset::{read_jsonl, sample_dataset, write_jsonl, Dataset};
use super::gradcheck::grad_check_suite;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::game::NormalFormGame;
use crate::nn::{ActorCritic, GradCheckReport, NetworkConfig};
use crate::ppo::{
    greedy_scores, evaluate_policy, train, write_metric_log, EvalScores, GameEpisodes, MetricRow, PreparedGame,
    ScoreSummary,
};
use crate::solvers::{solve, SolverConfig, SolverKind};
use crate::sweep::sweep_2x2;

/// Per-seed values with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedStats {
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl SeedStats {
    pub fn new(seeds: Vec<u64>, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n.max(1.0);
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { seeds, values, mean, std }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    crate_version: &'a str,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
    result: &'a T,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_manifest<T: Serialize>(config: &ExperimentConfig, command: &str, outputs: &[PathBuf], result: &T) -> Result<PathBuf> {
    let path = config.out_dir.join(format!("manifest_{}.json", command.replace('-', "_")));
    let manifest = Manifest {
        command,
        crate_version: env!("CARGO_PKG_VERSION"),
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        result,
    };
    write_json(&path, &manifest)?;
    Ok(path)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for row in rows {
        writer.serialize(row).map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// The configured dataset: read from `dataset_dir` when set, sampled
/// otherwise.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.dataset_dir {
        Some(dir) => Ok(Dataset {
            train: read_jsonl(&dir.join("train.jsonl"))?,
            test: read_jsonl(&dir.join("test.jsonl"))?,
        }),
        None => sample_dataset(config.case, config.train_games, config.test_games, config.dataset_seed),
    }
}

/// Writes `train.jsonl` and `test.jsonl`.
pub fn cmd_sample(config: &ExperimentConfig) -> Result<Dataset> {
    ensure_dir(&config.out_dir)?;
    let dataset = sample_dataset(config.case, config.train_games, config.test_games, config.dataset_seed)?;
    let train = config.out_dir.join("train.jsonl");
    let test = config.out_dir.join("test.jsonl");
    write_jsonl(&train, &dataset.train)?;
    write_jsonl(&test, &dataset.test)?;
    let counts = (dataset.train.len(), dataset.test.len());
    write_manifest(config, "sample", &[train, test], &counts)?;
    Ok(dataset)
}

/// Environment plus decomposed train and test games, shared by every seed.
pub struct Workbench {
    pub env: Arc<Environment>,
    pub network: NetworkConfig,
    pub train: Arc<Vec<PreparedGame>>,
    pub test: Arc<Vec<PreparedGame>>,
}

impl Workbench {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dataset = load_dataset(config)?;
        let env = Arc::new(Environment::new(config.episode_config())?);
        let network = config.network_config(0)?;
        Ok(Self {
            train: Arc::new(PreparedGame::prepare_all(dataset.train_games()?, &env, &network)?),
            test: Arc::new(PreparedGame::prepare_all(dataset.test_games()?, &env, &network)?),
            env,
            network,
        })
    }

    pub fn greedy(&self, model: &ActorCritic) -> Result<(ScoreSummary, ScoreSummary)> {
        Ok((greedy_scores(model, &self.env, &self.train)?, greedy_scores(model, &self.env, &self.test)?))
    }

    /// Uniform `[-1, 1]^r` actions, averaged over `episodes` per game.
    pub fn random(&self, games: &[PreparedGame], episodes: usize, seed: u64) -> Result<ScoreSummary> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniform = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
        let rank = self.env.config().rank();
        let mut totals: Vec<Option<f64>> = vec![Some(0.0); games.len()];
        for _ in 0..episodes {
            let run = evaluate_policy(&self.env, games, |_, _| Ok((0..rank).map(|_| uniform.sample(&mut rng)).collect()))?;
            for (t, s) in totals.iter_mut().zip(run.scores) {
                *t = t.zip(s).map(|(a, b)| a + b);
            }
        }
        Ok(ScoreSummary::from_scores(
            totals.into_iter().map(|t| t.map(|v| v / episodes as f64)).collect(),
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitRow {
    pub seed: u64,
    pub split: String,
    pub mean_score: f64,
    pub games: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub rows: Vec<SplitRow>,
    pub train: SeedStats,
    pub test: SeedStats,
}

fn split_row(seed: u64, split: &str, s: &ScoreSummary) -> SplitRow {
    SplitRow {
        seed,
        split: split.to_string(),
        mean_score: s.mean,
        games: s.scores.len(),
        excluded: s.excluded,
    }
}

/// Random-policy improvement scores on both splits for every seed.
pub fn cmd_baseline(config: &ExperimentConfig) -> Result<BaselineReport> {
    ensure_dir(&config.out_dir)?;
    let bench = Workbench::new(config)?;
    baseline_with(config, &bench)
}

pub fn baseline_with(config: &ExperimentConfig, bench: &Workbench) -> Result<BaselineReport> {
    let mut rows = Vec::new();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for &seed in &config.seeds {
        let tr = bench.random(&bench.train, config.baseline_episodes, seed)?;
        let te = bench.random(&bench.test, config.baseline_episodes, seed.wrapping_add(1 << 32))?;
        rows.push(split_row(seed, "train", &tr));
        rows.push(split_row(seed, "test", &te));
        train.push(tr.mean);
        test.push(te.mean);
    }
    let report = BaselineReport {
        rows,
        train: SeedStats::new(config.seeds.clone(), train),
        test: SeedStats::new(config.seeds.clone(), test),
    };
    let csv = config.out_dir.join("baseline.csv");
    write_rows(&csv, &report.rows)?;
    write_manifest(config, "baseline", &[csv], &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub best_env_steps: u64,
    /// Scores of the best-by-test checkpoint.
    pub best_train_score: f64,
    pub best_test_score: f64,
    pub test_excluded: usize,
    pub final_test_score: f64,
    pub seconds: f64,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub runs: Vec<SeedRun>,
    pub train: SeedStats,
    pub test: SeedStats,
}

/// Trains one policy per seed, keeping the checkpoint with the best test
/// score of each.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainSummary> {
    ensure_dir(&config.out_dir)?;
    let bench = Workbench::new(config)?;
    train_with(config, &bench)
}

pub fn train_with(config: &ExperimentConfig, bench: &Workbench) -> Result<TrainSummary> {
    let mut runs = Vec::new();
    let mut outputs = Vec::new();
    for &seed in &config.seeds {
        let run = train_seed(config, bench, seed)?;
        outputs.push(run.checkpoint.clone());
        outputs.push(run.metrics.clone());
        runs.push(run);
    }
    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    let summary = TrainSummary {
        train: SeedStats::new(seeds.clone(), runs.iter().map(|r| r.best_train_score).collect()),
        test: SeedStats::new(seeds, runs.iter().map(|r| r.best_test_score).collect()),
        runs,
    };
    let path = config.out_dir.join("train_summary.json");
    write_json(&path, &summary)?;
    outputs.push(path);
    write_manifest(config, "train", &outputs, &summary)?;
    Ok(summary)
}

fn train_seed(config: &ExperimentConfig, bench: &Workbench, seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let ppo = config.ppo_config(seed);
    let network = NetworkConfig {
        seed,
        ..bench.network.clone()
    };
    let mut envs = (0..ppo.num_envs)
        .map(|i| {
            GameEpisodes::new(
                Arc::clone(&bench.env),
                network.clone(),
                Arc::clone(&bench.train),
                seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut test_details: Vec<(f64, usize)> = Vec::new();
    let report = train(ActorCritic::new(network)?, &mut envs, &ppo, |model| {
        let (train, test) = bench.greedy(model)?;
        test_details.push((test.mean, test.excluded));
        Ok(Some(EvalScores {
            train: train.mean,
            test: test.mean,
        }))
    })?;

    let best_row = report
        .log
        .iter()
        .filter(|r| r.test_score.is_some())
        .find(|r| r.env_steps == report.best_env_steps)
        .cloned()
        .unwrap_or_else(|| empty_row(0));
    let final_test = report.log.iter().rev().find_map(|r| r.test_score).unwrap_or(0.0);
    let metrics = config.out_dir.join(format!("metrics_seed{seed}.csv"));
    write_metric_log(&metrics, &report.log)?;
    let checkpoint = config.out_dir.join(format!("checkpoint_seed{seed}.json"));
    let meta = serde_json::json!({
        "seed": seed,
        "env_steps": report.best_env_steps,
        "train_score": best_row.train_score,
        "test_score": best_row.test_score,
        "solver": config.solver.name(),
        "case": config.case,
    });
    report.best_model.save(&checkpoint, meta)?;
    report
        .final_model
        .save(&config.out_dir.join(format!("checkpoint_seed{seed}_final.json")), serde_json::json!({"seed": seed}))?;
    Ok(SeedRun {
        seed,
        best_env_steps: report.best_env_steps,
        best_train_score: best_row.train_score.unwrap_or(0.0),
        best_test_score: best_row.test_score.unwrap_or(0.0),
        test_excluded: test_details.first().map_or(0, |d| d.1),
        final_test_score: final_test,
        seconds: start.elapsed().as_secs_f64(),
        checkpoint,
        metrics,
    })
}

fn empty_row(env_steps: u64) -> MetricRow {
    MetricRow {
        env_steps,
        mean_episode_return: None,
        train_score: None,
        test_score: None,
        policy_loss: None,
        value_loss: None,
        entropy: None,
        clip_fraction: None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub checkpoint: String,
    pub solver: String,
    pub split: String,
    pub mean_score: f64,
    pub games: usize,
    pub excluded: usize,
}

/// Greedy scores of saved checkpoints on both splits of the configured
/// dataset.
pub fn cmd_eval(config: &ExperimentConfig, checkpoints: &[PathBuf]) -> Result<Vec<EvalRow>> {
    if checkpoints.is_empty() {
        return Err(Error::invalid("no checkpoints to evaluate"));
    }
    ensure_dir(&config.out_dir)?;
    let mut rows = Vec::new();
    let mut bench: Option<(NetworkConfig, Workbench)> = None;
    for path in checkpoints {
        let (model, _) = ActorCritic::load(path)?;
        let reuse = bench.as_ref().is_some_and(|(n, _)| same_encoding(n, model.config()));
        if !reuse {
            let mut cfg = config.clone();
            cfg.encoder = Some(model.config().mode);
            cfg.rank = model.config().action_dim;
            cfg.validate()?;
            let dataset = load_dataset(&cfg)?;
            let env = Arc::new(Environment::new(cfg.episode_config())?);
            let network = model.config().clone();
            let wb = Workbench {
                train: Arc::new(PreparedGame::prepare_all(dataset.train_games()?, &env, &network)?),
                test: Arc::new(PreparedGame::prepare_all(dataset.test_games()?, &env, &network)?),
                env,
                network: network.clone(),
            };
            bench = Some((network, wb));
        }
        let wb = &bench.as_ref().expect("set above").1;
        let (train, test) = wb.greedy(&model)?;
        for (split, s) in [("train", &train), ("test", &test)] {
            rows.push(EvalRow {
                checkpoint: path.display().to_string(),
                solver: config.solver.name().to_string(),
                split: split.to_string(),
                mean_score: s.mean,
                games: s.scores.len(),
                excluded: s.excluded,
            });
        }
    }
    let csv = config.out_dir.join("eval.csv");
    write_rows(&csv, &rows)?;
    write_manifest(config, "eval", &[csv], &rows)?;
    Ok(rows)
}

fn same_encoding(a: &NetworkConfig, b: &NetworkConfig) -> bool {
    a.mode == b.mode
        && a.action_dim == b.action_dim
        && a.graph_alpha == b.graph_alpha
        && a.graph_population == b.graph_population
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub game: String,
    pub solver: String,
    pub side: usize,
    pub unmodified_nash_conv: f64,
    pub min_nash_conv: f64,
    pub argmin_delta1: f64,
    pub argmin_delta2: f64,
    pub csv: PathBuf,
}

/// Shifts both players' payoffs at the first joint action over
/// `[-2, 2]^2` in steps of 0.1 and records NashConv on the original game.
pub fn cmd_sweep(config: &ExperimentConfig, name: &str, game: &NormalFormGame) -> Result<SweepSummary> {
    ensure_dir(&config.out_dir)?;
    let solver = config.solver_config();
    let grid = sweep_2x2(game, &solver, (-2.0, 2.0), 0.1)?;
    let csv = config.out_dir.join(format!("sweep_{name}_{}.csv", config.solver.name()));
    grid.write_csv(&csv)?;
    let (origin, best) = (grid.origin(), grid.argmin());
    let summary = SweepSummary {
        game: name.to_string(),
        solver: config.solver.name().to_string(),
        side: grid.side(),
        unmodified_nash_conv: origin.nash_conv,
        min_nash_conv: best.nash_conv,
        argmin_delta1: best.delta1,
        argmin_delta2: best.delta2,
        csv: csv.clone(),
    };
    let path = config.out_dir.join(format!("sweep_{name}_{}.json", config.solver.name()));
    write_json(&path, &summary)?;
    write_manifest(config, "sweep", &[csv, path], &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub solver: String,
    pub games: usize,
    pub mean_nash_conv: f64,
    pub max_nash_conv: f64,
    pub mean_solve_ms: f64,
    pub mean_iterations: f64,
}

/// Unmodified-game NashConv and solve time of every solver on the test
/// split.
pub fn cmd_solver_bench(config: &ExperimentConfig, max_games: usize) -> Result<Vec<BenchRow>> {
    ensure_dir(&config.out_dir)?;
    let dataset = load_dataset(config)?;
    let games: Vec<NormalFormGame> = dataset.test_games()?.into_iter().take(max_games.max(1)).collect();
    let mut rows = Vec::new();
    for kind in SolverKind::ALL {
        let solver: SolverConfig = if kind == config.solver {
            config.solver_config()
        } else {
            kind.default_config()
        };
        let (mut total, mut worst, mut iters) = (0.0, 0.0f64, 0usize);
        let start = Instant::now();
        for game in &games {
            let solution = solve(game, &solver)?;
            let nc = game.nash_conv(&solution.profile)?;
            total += nc;
            worst = worst.max(nc);
            iters += solution.iterations;
        }
        let n = games.len() as f64;
        rows.push(BenchRow {
            solver: kind.name().to_string(),
            games: games.len(),
            mean_nash_conv: total / n,
            max_nash_conv: worst,
            mean_solve_ms: start.elapsed().as_secs_f64() * 1e3 / n,
            mean_iterations: iters as f64 / n,
        });
    }
    let csv = config.out_dir.join("solver_bench.csv");
    write_rows(&csv, &rows)?;
    write_manifest(config, "solver-bench", &[csv], &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckRow {
    pub target: String,
    pub max_rel_error: f64,
    pub worst_block: String,
    pub worst_index: usize,
    pub entries: usize,
}

/// Finite-difference check of every layer type and the full PPO loss.
pub fn cmd_grad_check(config: &ExperimentConfig, seed: u64) -> Result<Vec<GradCheckRow>> {
    ensure_dir(&config.out_dir)?;
    let rows: Vec<GradCheckRow> = grad_check_suite(seed)?
        .into_iter()
        .map(|(target, r): (String, GradCheckReport)| GradCheckRow {
            target,
            max_rel_error: r.max_rel_error,
            worst_block: r.worst.0,
            worst_index: r.worst.1,
            entries: r.entries_checked,
        })
        .collect();
    let csv = config.out_dir.join("grad_check.csv");
    write_rows(&csv, &rows)?;
    write_manifest(config, "grad-check", &[csv], &rows)?;
    Ok(rows)
}
