use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomposition::CpConfig;
use crate::env::{EpisodeConfig, DEFAULT_DISCOUNT, DEFAULT_ETA_STEP, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::nn::{EncoderMode, NetworkConfig};
use crate::ppo::PpoConfig;
use crate::solvers::{SolverConfig, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Every game has two players with five actions each.
    #[default]
    Simple,
    /// Two or three players, each with two to four actions.
    General,
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Case::Simple),
            "general" => Ok(Case::General),
            other => Err(Error::invalid(format!("unknown case {other:?}, expected simple or general"))),
        }
    }
}

/// Everything a run needs. Missing TOML keys take the full-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub case: Case,
    pub train_games: usize,
    pub test_games: usize,
    pub dataset_seed: u64,
    /// Read datasets from `train.jsonl` / `test.jsonl` here instead of
    /// sampling them.
    pub dataset_dir: Option<PathBuf>,
    pub solver: SolverKind,
    /// Overrides the solver's default parameters; its kind must match
    /// `solver`.
    pub solver_config: Option<SolverConfig>,
    pub horizon: usize,
    pub eta_step: f64,
    pub rank: usize,
    pub cp_max_iters: usize,
    pub cp_tol: f64,
    /// Flat for the simple case and graph for the general case when unset.
    pub encoder: Option<EncoderMode>,
    pub gcn_layers: usize,
    pub node_embed_dim: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub init_log_std: f64,
    pub ppo: PpoConfig,
    pub seeds: Vec<u64>,
    /// Random-policy episodes per game in the baseline.
    pub baseline_episodes: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cp = CpConfig::default();
        Self {
            case: Case::Simple,
            train_games: 3000,
            test_games: 500,
            dataset_seed: 0,
            dataset_dir: None,
            solver: SolverKind::AlphaRank,
            solver_config: None,
            horizon: DEFAULT_HORIZON,
            eta_step: DEFAULT_ETA_STEP,
            rank: cp.rank,
            cp_max_iters: cp.max_iters,
            cp_tol: cp.tol,
            encoder: None,
            gcn_layers: 2,
            node_embed_dim: 20,
            mlp_hidden: 64,
            mlp_layers: 3,
            init_log_std: 0.0,
            ppo: PpoConfig::default(),
            seeds: vec![0, 1, 2],
            baseline_episodes: 1,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    /// Single-CPU profile: 200 train / 50 test games, horizon 20 and
    /// 1e5 environment steps per seed.
    pub fn desk_scale(mut self) -> Self {
        self.train_games = 200;
        self.test_games = 50;
        self.horizon = 20;
        self.ppo.total_env_steps = 100_000;
        self
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver_config.clone().unwrap_or_else(|| self.solver.default_config())
    }

    pub fn encoder(&self) -> EncoderMode {
        self.encoder.unwrap_or(match self.case {
            Case::Simple => EncoderMode::FlatMlp,
            Case::General => EncoderMode::Graph,
        })
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            horizon: self.horizon,
            eta_step: self.eta_step,
            cp: CpConfig {
                rank: self.rank,
                max_iters: self.cp_max_iters,
                tol: self.cp_tol,
                seed: self.dataset_seed,
            },
            solver: self.solver_config(),
            discount: DEFAULT_DISCOUNT,
        }
    }

    /// Network layout for this case; flat mode needs the fixed game shape.
    pub fn network_config(&self, seed: u64) -> Result<NetworkConfig> {
        let base = match self.encoder() {
            EncoderMode::Graph => NetworkConfig::graph(self.rank),
            EncoderMode::FlatMlp => match self.case {
                Case::Simple => NetworkConfig::flat(&[5, 5], self.rank),
                Case::General => return Err(Error::invalid("the general case mixes game shapes and needs the graph encoder")),
            },
        };
        Ok(NetworkConfig {
            gcn_layers: self.gcn_layers,
            node_embed_dim: self.node_embed_dim,
            mlp_hidden: self.mlp_hidden,
            mlp_layers: self.mlp_layers,
            init_log_std: self.init_log_std,
            seed,
            ..base
        })
    }

    pub fn ppo_config(&self, seed: u64) -> PpoConfig {
        PpoConfig {
            discount: DEFAULT_DISCOUNT,
            seed,
            ..self.ppo.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_games == 0 || self.test_games == 0 {
            return Err(Error::invalid("both dataset splits need at least one game"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.baseline_episodes == 0 {
            return Err(Error::invalid("baseline_episodes must be positive"));
        }
        if let Some(cfg) = &self.solver_config {
            if cfg.kind() != self.solver {
                return Err(Error::invalid(format!(
                    "solver_config is for {}, solver is {}",
                    cfg.kind(),
                    self.solver
                )));
            }
        }
        self.episode_config().validate()?;
        self.network_config(0)?.validate()?;
        self.ppo.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_files() {
        let config = ExperimentConfig::default().desk_scale();
        let back: ExperimentConfig = toml::from_str(&config.to_toml()).unwrap();
        assert_eq!(back, config);

        let partial: ExperimentConfig = toml::from_str("case = \"general\"\nsolver = \"fp\"\n[ppo]\nnum_envs = 4\n").unwrap();
        assert_eq!(partial.case, Case::General);
        assert_eq!(partial.solver, SolverKind::FictitiousPlay);
        assert_eq!(partial.ppo.num_envs, 4);
        assert_eq!(partial.ppo.minibatches, 64);
        assert_eq!(partial.encoder(), EncoderMode::Graph);
    }

    #[test]
    fn desk_scale_profile() {
        let c = ExperimentConfig::default().desk_scale();
        assert_eq!((c.train_games, c.test_games, c.horizon), (200, 50, 20));
        assert_eq!(c.ppo.total_env_steps, 100_000);
        assert_eq!(c.seeds.len(), 3);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_mismatched_solver_config() {
        let c = ExperimentConfig {
            solver_config: Some(SolverKind::Prd.default_config()),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            case: Case::General,
            encoder: Some(EncoderMode::FlatMlp),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
