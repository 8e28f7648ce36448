//! Environments as seen by the rollout collector.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decomposition::CpFactors;
use crate::env::{is_scorable, EnvState, Environment};
use crate::error::{Error, Result};
use crate::game::NormalFormGame;
use crate::nn::{graph_adjacency, prepare_input_cached, EncodedInput, EncoderMode, Matrix, NetworkConfig};
use crate::solvers::Solver;

/// One environment instance driven step by step. Implementations reset
/// themselves when an episode ends.
pub trait RolloutEnv {
    fn observe(&self) -> Result<EncodedInput>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub reward: f64,
    pub done: bool,
    /// Set on the step that finishes an episode.
    pub episode: Option<EpisodeSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub episode_return: f64,
    pub length: usize,
    /// `None` for games excluded from scoring.
    pub improvement_score: Option<f64>,
}

/// A dataset game with its decomposition and, in graph mode, the response
/// graph of the original game computed once.
#[derive(Debug, Clone)]
pub struct PreparedGame {
    pub game: Arc<NormalFormGame>,
    pub factors: Arc<CpFactors>,
    pub original_graph: Option<Arc<Matrix>>,
}

impl PreparedGame {
    pub fn new<S: Solver>(game: NormalFormGame, env: &Environment<S>, network: &NetworkConfig) -> Result<Self> {
        let factors = Arc::new(env.decompose(&game)?);
        let original_graph = match network.mode {
            EncoderMode::Graph => Some(graph_adjacency(&game, network)?),
            EncoderMode::FlatMlp => None,
        };
        Ok(Self {
            game: Arc::new(game),
            factors,
            original_graph,
        })
    }

    pub fn prepare_all<S: Solver>(
        games: impl IntoIterator<Item = NormalFormGame>,
        env: &Environment<S>,
        network: &NetworkConfig,
    ) -> Result<Vec<Self>> {
        games.into_iter().map(|g| Self::new(g, env, network)).collect()
    }

    pub fn reset<S: Solver>(&self, env: &Environment<S>) -> Result<EnvState> {
        env.reset_with_factors(Arc::clone(&self.game), Arc::clone(&self.factors))
    }

    pub fn input(&self, state: &EnvState, network: &NetworkConfig) -> Result<EncodedInput> {
        prepare_input_cached(state.observation(), network, self.original_graph.as_ref())
    }
}

/// Plays episodes over a game dataset, visiting the games in an order
/// reshuffled every pass.
pub struct GameEpisodes<S: Solver> {
    env: Arc<Environment<S>>,
    network: NetworkConfig,
    games: Arc<Vec<PreparedGame>>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    current: usize,
    state: EnvState,
    episode_return: f64,
}

impl<S: Solver> GameEpisodes<S> {
    pub fn new(env: Arc<Environment<S>>, network: NetworkConfig, games: Arc<Vec<PreparedGame>>, seed: u64) -> Result<Self> {
        if games.is_empty() {
            return Err(Error::invalid("empty game dataset"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..games.len()).collect();
        order.shuffle(&mut rng);
        let current = order[0];
        let state = games[current].reset(&env)?;
        Ok(Self {
            env,
            network,
            games,
            order,
            cursor: 1,
            rng,
            current,
            state,
            episode_return: 0.0,
        })
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    fn next_game(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }
}

impl<S: Solver> RolloutEnv for GameEpisodes<S> {
    fn observe(&self) -> Result<EncodedInput> {
        self.games[self.current].input(&self.state, &self.network)
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let result = self.env.step(&mut self.state, action)?;
        self.episode_return += result.reward;
        let mut episode = None;
        if result.done {
            let baseline = self.state.baseline_nc();
            episode = Some(EpisodeSummary {
                episode_return: self.episode_return,
                length: self.state.step_index(),
                improvement_score: is_scorable(baseline).then(|| self.state.improvement_score()),
            });
            self.current = self.next_game();
            self.state = self.games[self.current].reset(&self.env)?;
            self.episode_return = 0.0;
        }
        Ok(EnvStep {
            reward: result.reward,
            done: result.done,
            episode,
        })
    }
}

/// Game-free check environment: the reward is `-|a - target|^2` and
/// the observation is constant.
#[derive(Debug, Clone)]
pub struct TargetEnv {
    target: Vec<f64>,
    horizon: usize,
    step: usize,
    episode_return: f64,
}

impl TargetEnv {
    pub fn new(target: Vec<f64>, horizon: usize) -> Result<Self> {
        if horizon == 0 || target.is_empty() {
            return Err(Error::invalid("target environment needs a target and a positive horizon"));
        }
        Ok(Self {
            target,
            horizon,
            step: 0,
            episode_return: 0.0,
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Flat network matching the one-feature observation.
    pub fn network_config(&self, seed: u64) -> NetworkConfig {
        NetworkConfig {
            mode: EncoderMode::FlatMlp,
            flat_input_dim: 1,
            seed,
            ..NetworkConfig::graph(self.target.len())
        }
    }
}

impl RolloutEnv for TargetEnv {
    fn observe(&self) -> Result<EncodedInput> {
        Ok(EncodedInput::Flat(vec![1.0]))
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if action.len() != self.target.len() {
            return Err(Error::shape(format!("action has {} entries, target {}", action.len(), self.target.len())));
        }
        let reward = -action
            .iter()
            .zip(&self.target)
            .map(|(a, t)| (a - t).powi(2))
            .sum::<f64>();
        self.step += 1;
        self.episode_return += reward;
        let done = self.step == self.horizon;
        let episode = done.then(|| EpisodeSummary {
            episode_return: self.episode_return,
            length: self.step,
            improvement_score: None,
        });
        if done {
            self.step = 0;
            self.episode_return = 0.0;
        }
        Ok(EnvStep { reward, done, episode })
    }
}
