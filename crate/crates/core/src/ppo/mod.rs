//! Proximal policy optimization over vectors of environments.

mod adam;
mod buffer;
mod envs;
mod eval;
mod update;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use buffer::{collect_rollouts, compute_returns_advantages, RolloutBuffer};
pub use envs::{EnvStep, EpisodeSummary, GameEpisodes, PreparedGame, RolloutEnv, TargetEnv};
pub use eval::{evaluate_policy, greedy_scores, ScoreSummary};
pub use update::{ppo_loss, ppo_update, PpoBatch, PpoLoss, UpdateMetrics};

use crate::error::{Error, Result};
use crate::nn::ActorCritic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub num_envs: usize,
    pub steps_per_rollout: usize,
    pub ppo_epochs: usize,
    pub clip: f64,
    pub minibatches: usize,
    pub total_env_steps: u64,
    /// Rollouts between greedy evaluations.
    pub eval_interval: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            discount: 0.99,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            num_envs: 20,
            steps_per_rollout: 100,
            ppo_epochs: 16,
            clip: 0.2,
            minibatches: 64,
            total_env_steps: 600_000,
            eval_interval: 1,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn rollout_size(&self) -> usize {
        self.num_envs * self.steps_per_rollout
    }

    pub fn num_updates(&self) -> u64 {
        self.total_env_steps.div_ceil(self.rollout_size().max(1) as u64)
    }

    /// `len / minibatches`, rounded down.
    pub fn minibatch_size(&self, len: usize) -> Result<usize> {
        match len / self.minibatches.max(1) {
            0 => Err(Error::invalid(format!(
                "{len} transitions cannot fill {} minibatches",
                self.minibatches
            ))),
            size => Ok(size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("discount", self.discount),
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("max_grad_norm", self.max_grad_norm),
            ("clip", self.clip),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
        if self.discount > 1.0 {
            return Err(Error::invalid("discount must not exceed 1"));
        }
        let counts = [self.num_envs, self.steps_per_rollout, self.ppo_epochs, self.minibatches, self.eval_interval];
        if counts.contains(&0) {
            return Err(Error::invalid("PPO counts must be positive"));
        }
        self.minibatch_size(self.rollout_size()).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalScores {
    pub train: f64,
    pub test: f64,
}

/// One line of the training log. Empty fields are written as blanks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub env_steps: u64,
    pub mean_episode_return: Option<f64>,
    pub train_score: Option<f64>,
    pub test_score: Option<f64>,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub clip_fraction: Option<f64>,
}

pub fn write_metric_log(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for row in rows {
        writer.serialize(row).map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub final_model: ActorCritic,
    /// Model with the highest test score after at least one update, or the
    /// initial model when nothing was evaluated.
    pub best_model: ActorCritic,
    pub best_test_score: Option<f64>,
    pub best_env_steps: u64,
    pub log: Vec<MetricRow>,
    pub updates: Vec<UpdateMetrics>,
}

/// Alternates rollouts and PPO updates until `total_env_steps` transitions
/// have been collected. `evaluate` is called on the initial model and after
/// every `eval_interval` rollouts; the best updated model by test score is
/// kept. The initial evaluation is logged as a reference but never selected.
pub fn train<E, F>(model: ActorCritic, envs: &mut [E], config: &PpoConfig, mut evaluate: F) -> Result<TrainReport>
where
    E: RolloutEnv,
    F: FnMut(&ActorCritic) -> Result<Option<EvalScores>>,
{
    config.validate()?;
    if envs.len() != config.num_envs {
        return Err(Error::invalid(format!(
            "{} environments given, config expects {}",
            envs.len(),
            config.num_envs
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = model;
    let mut optimizer = Adam::new(model.params(), config.learning_rate);
    let mut report = TrainReport {
        best_model: model.clone(),
        final_model: model.clone(),
        best_test_score: None,
        best_env_steps: 0,
        log: Vec::new(),
        updates: Vec::new(),
    };
    if config.total_env_steps == 0 {
        return Ok(report);
    }

    let mut track = |model: &ActorCritic, env_steps: u64, row: &mut MetricRow, report: &mut TrainReport| -> Result<()> {
        if let Some(scores) = evaluate(model)? {
            row.train_score = Some(scores.train);
            row.test_score = Some(scores.test);
            if env_steps > 0 && report.best_test_score.is_none_or(|best| scores.test > best) {
                report.best_test_score = Some(scores.test);
                report.best_model = model.clone();
                report.best_env_steps = env_steps;
            }
        }
        Ok(())
    };

    let mut initial = MetricRow {
        env_steps: 0,
        mean_episode_return: None,
        train_score: None,
        test_score: None,
        policy_loss: None,
        value_loss: None,
        entropy: None,
        clip_fraction: None,
    };
    track(&model, 0, &mut initial, &mut report)?;
    report.log.push(initial);

    let mut env_steps = 0u64;
    for update in 1..=config.num_updates() {
        let mut buffer = collect_rollouts(&model, envs, config.steps_per_rollout, &mut rng)?;
        compute_returns_advantages(&mut buffer, config.discount)?;
        let metrics = ppo_update(&mut model, &mut optimizer, &buffer, config, &mut rng)?;
        env_steps += buffer.len() as u64;

        let returns: Vec<f64> = buffer.episodes.iter().map(|e| e.episode_return).collect();
        let mut row = MetricRow {
            env_steps,
            mean_episode_return: (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64),
            train_score: None,
            test_score: None,
            policy_loss: Some(metrics.policy_loss),
            value_loss: Some(metrics.value_loss),
            entropy: Some(metrics.entropy),
            clip_fraction: Some(metrics.clip_fraction),
        };
        if update % config.eval_interval as u64 == 0 || update == config.num_updates() {
            track(&model, env_steps, &mut row, &mut report)?;
        }
        report.log.push(row);
        report.updates.push(metrics);
    }
    report.final_model = model;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Uniform};

    use super::*;
    use crate::nn::{grad_check, EncodedInput, Matrix, NetworkConfig, Tape, DEFAULT_EPS};

    fn small_config() -> PpoConfig {
        PpoConfig {
            num_envs: 2,
            steps_per_rollout: 8,
            ppo_epochs: 2,
            minibatches: 4,
            total_env_steps: 32,
            ..PpoConfig::default()
        }
    }

    fn target_model(env: &TargetEnv, seed: u64) -> ActorCritic {
        ActorCritic::new(env.network_config(seed)).unwrap()
    }

    fn filled_buffer(rewards: Vec<f64>, values: Vec<f64>, dones: Vec<bool>, last: f64) -> RolloutBuffer {
        let n = rewards.len();
        RolloutBuffer {
            num_envs: 1,
            steps: n,
            inputs: vec![EncodedInput::Flat(vec![1.0]); n],
            actions: vec![vec![0.0]; n],
            log_probs: vec![0.0; n],
            rewards,
            values,
            dones,
            last_values: vec![last],
            returns: Vec::new(),
            advantages: Vec::new(),
            episodes: Vec::new(),
        }
    }

    #[test]
    fn default_rollout_has_2000_transitions() {
        let config = PpoConfig::default();
        assert_eq!(config.rollout_size(), 2000);
        assert_eq!(config.minibatch_size(2000).unwrap(), 31);
        config.validate().unwrap();
    }

    #[test]
    fn counts_completed_episodes() {
        let mut envs = vec![TargetEnv::new(vec![0.2], 2).unwrap()];
        let model = target_model(&envs[0], 0);
        let buffer = collect_rollouts(&model, &mut envs, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(buffer.len(), 4);
        assert_eq!(buffer.episodes.len(), 2);
        assert_eq!(buffer.dones, vec![false, true, false, true]);
    }

    #[test]
    fn rollouts_are_deterministic() {
        let run = || {
            let mut envs = vec![TargetEnv::new(vec![0.2, -0.5], 3).unwrap(); 3];
            let model = target_model(&envs[0], 1);
            let b = collect_rollouts(&model, &mut envs, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            (b.actions, b.log_probs, b.rewards)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn discounted_returns() {
        let mut b = filled_buffer(vec![1.0, 1.0], vec![0.4, 0.0], vec![false, true], 123.0);
        compute_returns_advantages(&mut b, 0.99).unwrap();
        assert!((b.returns[0] - 1.99).abs() < 1e-12);
        assert_eq!(b.returns[1], 1.0);
        assert!(compute_returns_advantages(&mut b, 0.99).is_err());

        let mut b = filled_buffer(vec![1.0], vec![0.4], vec![true], 0.0);
        compute_returns_advantages(&mut b, 0.99).unwrap();
        assert!((b.advantages[0] - 0.6).abs() < 1e-12);

        let mut b = filled_buffer(vec![0.5], vec![0.0], vec![false], 2.0);
        compute_returns_advantages(&mut b, 0.5).unwrap();
        assert!((b.returns[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero_advantages() {
        let mut b = filled_buffer(vec![0.0; 4], vec![0.0; 4], vec![false, true, false, true], 0.0);
        compute_returns_advantages(&mut b, 0.99).unwrap();
        assert!(b.advantages.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn advantages_are_normalized() {
        let mut b = filled_buffer(vec![1.0, -2.0, 0.5, 3.0], vec![0.1, 0.0, -0.3, 0.2], vec![true; 4], 0.0);
        compute_returns_advantages(&mut b, 0.99).unwrap();
        let mean = b.advantages.iter().sum::<f64>() / 4.0;
        let var = b.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    fn one_sample_loss(ratio: f64, advantage: f64) -> f64 {
        let env = TargetEnv::new(vec![0.0], 1).unwrap();
        let model = target_model(&env, 0);
        let input = EncodedInput::Flat(vec![1.0]);
        let (dist, _) = model.evaluate(&input).unwrap();
        let action = Matrix::row_vector(vec![0.3]);
        let old = dist.log_prob(&[0.3]) - ratio.ln();
        let config = PpoConfig::default();
        let mut tape = Tape::new();
        let loss = ppo_loss(
            &mut tape,
            &model,
            model.params(),
            PpoBatch {
                inputs: &[&input],
                actions: &action,
                old_log_probs: &[old],
                advantages: &[advantage],
                returns: &[0.0],
            },
            &config,
        )
        .unwrap();
        -tape.value(loss.policy).scalar()
    }

    #[test]
    fn clipped_surrogate_arithmetic() {
        assert!((one_sample_loss(1.0, 0.7) - 0.7).abs() < 1e-12);
        assert!((one_sample_loss(2.0, 1.0) - 1.2).abs() < 1e-12);
        assert!((one_sample_loss(0.5, 1.0) - 0.5).abs() < 1e-12);
        assert!((one_sample_loss(0.5, -1.0) + 0.8).abs() < 1e-12);
    }

    #[test]
    fn first_ratio_is_one_and_gradients_are_clipped() {
        let mut envs = vec![TargetEnv::new(vec![0.6], 4).unwrap(); 2];
        let mut model = target_model(&envs[0], 3);
        let config = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buffer = collect_rollouts(&model, &mut envs, 8, &mut rng).unwrap();
        compute_returns_advantages(&mut buffer, config.discount).unwrap();
        let mut adam = Adam::new(model.params(), config.learning_rate);
        let metrics = ppo_update(&mut model, &mut adam, &buffer, &config, &mut rng).unwrap();
        assert!((metrics.first_ratio - 1.0).abs() < 1e-6);
        assert!(metrics.max_clipped_grad_norm <= config.max_grad_norm + 1e-9);
        assert_eq!(metrics.minibatches, 8);
        assert_eq!(adam.steps_taken(), 8);
    }

    #[test]
    fn update_requires_returns() {
        let mut envs = vec![TargetEnv::new(vec![0.6], 4).unwrap(); 2];
        let mut model = target_model(&envs[0], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let buffer = collect_rollouts(&model, &mut envs, 8, &mut rng).unwrap();
        let mut adam = Adam::new(model.params(), 1e-3);
        assert!(ppo_update(&mut model, &mut adam, &buffer, &small_config(), &mut rng).is_err());
    }

    #[test]
    fn zero_steps_returns_initial_model() {
        let mut envs = vec![TargetEnv::new(vec![0.6], 4).unwrap(); 2];
        let model = target_model(&envs[0], 3);
        let config = PpoConfig {
            total_env_steps: 0,
            ..small_config()
        };
        let report = train(model.clone(), &mut envs, &config, |_| Ok(None)).unwrap();
        assert_eq!(report.best_model, model);
        assert_eq!(report.final_model, model);
        assert!(report.log.is_empty());
    }

    #[test]
    fn initial_evaluation_is_logged_but_not_selected() {
        let mut envs = vec![TargetEnv::new(vec![0.6], 4).unwrap(); 2];
        let model = target_model(&envs[0], 3);
        let mut calls = 0;
        let report = train(model, &mut envs, &small_config(), |_| {
            calls += 1;
            let test = if calls == 1 { 10.0 } else { calls as f64 };
            Ok(Some(EvalScores { train: 0.0, test }))
        })
        .unwrap();
        assert_eq!(report.log[0].test_score, Some(10.0));
        assert_eq!(report.best_test_score, Some(3.0));
        assert_eq!(report.best_env_steps, 32);
    }

    #[test]
    fn training_logs_are_deterministic() {
        let run = || {
            let mut envs = vec![TargetEnv::new(vec![0.6, -0.1], 4).unwrap(); 2];
            let model = target_model(&envs[0], 3);
            let report = train(model, &mut envs, &small_config(), |m| {
                let mean = m.evaluate(&EncodedInput::Flat(vec![1.0]))?.0.mean;
                Ok(Some(EvalScores { train: mean[0], test: -mean[1] }))
            })
            .unwrap();
            report.log
        };
        let a = run();
        assert_eq!(a.len(), 3);
        assert_eq!(a, run());
    }

    #[test]
    fn composed_loss_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = Uniform::new(-1.0, 1.0).unwrap();
        for config in [NetworkConfig::flat(&[2, 3], 4), NetworkConfig::graph(4)] {
            let model = ActorCritic::new(NetworkConfig { seed: 5, ..config }).unwrap();
            let inputs: Vec<EncodedInput> = (0..3)
                .map(|i| {
                    let spec = crate::game::GameSpec::new(vec![2, 3]);
                    let a = crate::game::sample_random_game(&spec, 100 + i).unwrap();
                    let b = crate::game::sample_random_game(&spec, 200 + i).unwrap();
                    crate::nn::prepare_input(crate::env::Observation { original: &a, current: &b }, model.config()).unwrap()
                })
                .collect();
            let refs: Vec<&EncodedInput> = inputs.iter().collect();
            let actions = Matrix::from_vec(3, 4, (0..12).map(|_| u.sample(&mut rng)).collect());
            let old: Vec<f64> = (0..3).map(|_| -3.7 + 0.05 * u.sample(&mut rng)).collect();
            let adv: Vec<f64> = (0..3).map(|_| u.sample(&mut rng)).collect();
            let ret: Vec<f64> = (0..3).map(|_| u.sample(&mut rng)).collect();
            let config = PpoConfig::default();
            let report = grad_check(model.params(), DEFAULT_EPS, |tape, store| {
                let batch = PpoBatch {
                    inputs: &refs,
                    actions: &actions,
                    old_log_probs: &old,
                    advantages: &adv,
                    returns: &ret,
                };
                Ok(ppo_loss(tape, &model, store, batch, &config)?.total)
            })
            .unwrap();
            assert!(report.max_rel_error <= 1e-4, "{report:?}");
        }
    }
}
