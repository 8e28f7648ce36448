//! Actor-critic network over (original game, current game) observations.
//!
//! In flat mode both payoff tensors are concatenated into one vector. In
//! graph mode each game becomes its alpha-rank response graph, a GCN stack
//! with unit node features embeds it, and the two mean-pooled embeddings are
//! concatenated. Actor and critic each own their encoder and MLP head.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{GraphEncoder, Mlp};
use super::matrix::Matrix;
use super::params::{ParamId, ParamStore};
use super::policy::DiagGaussian;
use super::tape::{Tape, Var};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::game::NormalFormGame;
use crate::response_graph::{build_response_graph, DEFAULT_ALPHA, DEFAULT_POPULATION};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    FlatMlp,
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub mode: EncoderMode,
    pub gcn_layers: usize,
    pub node_embed_dim: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub action_dim: usize,
    /// Length of the flat observation; only used in flat mode.
    pub flat_input_dim: usize,
    pub graph_alpha: f64,
    pub graph_population: f64,
    /// Initial log standard deviation of the action distribution.
    #[serde(default)]
    pub init_log_std: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn flat(action_counts: &[usize], action_dim: usize) -> Self {
        let per_game = action_counts.len() * action_counts.iter().product::<usize>();
        Self {
            mode: EncoderMode::FlatMlp,
            flat_input_dim: 2 * per_game,
            ..Self::graph(action_dim)
        }
    }

    pub fn graph(action_dim: usize) -> Self {
        Self {
            mode: EncoderMode::Graph,
            gcn_layers: 2,
            node_embed_dim: 20,
            mlp_hidden: 64,
            mlp_layers: 3,
            action_dim,
            flat_input_dim: 0,
            graph_alpha: DEFAULT_ALPHA,
            graph_population: DEFAULT_POPULATION,
            init_log_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.node_embed_dim, self.mlp_hidden, self.mlp_layers, self.action_dim];
        if dims.contains(&0) {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        match self.mode {
            EncoderMode::FlatMlp if self.flat_input_dim == 0 => {
                Err(Error::invalid("flat mode needs a positive input dimension"))
            }
            EncoderMode::Graph if self.gcn_layers == 0 => Err(Error::invalid("graph mode needs GCN layers")),
            _ => Ok(()),
        }
    }

    /// Length of the feature vector fed to the MLP heads.
    pub fn feature_dim(&self) -> usize {
        match self.mode {
            EncoderMode::FlatMlp => self.flat_input_dim,
            EncoderMode::Graph => 2 * self.node_embed_dim,
        }
    }
}

/// Observation preprocessed into network input: either the flattened payoff
/// tensors or the symmetrized response-graph adjacencies.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodedInput {
    Flat(Vec<f64>),
    Graph {
        original: Arc<Matrix>,
        current: Arc<Matrix>,
    },
}

/// Symmetrized alpha-rank response graph of a game, `(C + C^T) / 2`.
pub fn graph_adjacency(game: &NormalFormGame, config: &NetworkConfig) -> Result<Arc<Matrix>> {
    let graph = build_response_graph(game, config.graph_alpha, config.graph_population)?;
    let n = graph.num_nodes();
    Ok(Arc::new(Matrix::from_vec(n, n, graph.symmetrized())))
}

/// Flattened original and current payoff tensors, concatenated.
pub fn flat_features(obs: Observation<'_>) -> Result<Vec<f64>> {
    if obs.original.shape() != obs.current.shape() {
        return Err(Error::shape("original and current games differ in shape"));
    }
    Ok(obs
        .original
        .payoffs()
        .iter()
        .chain(obs.current.payoffs())
        .copied()
        .collect())
}

pub fn prepare_input(obs: Observation<'_>, config: &NetworkConfig) -> Result<EncodedInput> {
    prepare_input_cached(obs, config, None)
}

/// Like [`prepare_input`], reusing an adjacency already built for the
/// original game.
pub fn prepare_input_cached(
    obs: Observation<'_>,
    config: &NetworkConfig,
    original_graph: Option<&Arc<Matrix>>,
) -> Result<EncodedInput> {
    match config.mode {
        EncoderMode::FlatMlp => {
            let features = flat_features(obs)?;
            if features.len() != config.flat_input_dim {
                return Err(Error::shape(format!(
                    "flat observation has {} features, network expects {}",
                    features.len(),
                    config.flat_input_dim
                )));
            }
            Ok(EncodedInput::Flat(features))
        }
        EncoderMode::Graph => {
            let original = match original_graph {
                Some(g) => Arc::clone(g),
                None => graph_adjacency(obs.original, config)?,
            };
            Ok(EncodedInput::Graph {
                original,
                current: graph_adjacency(obs.current, config)?,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    config: NetworkConfig,
    store: ParamStore,
    actor_encoder: Option<GraphEncoder>,
    critic_encoder: Option<GraphEncoder>,
    actor: Mlp,
    critic: Mlp,
    log_std: ParamId,
}

/// Batched forward outputs on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BatchOutput {
    /// `n x action_dim`
    pub mean: Var,
    /// `1 x action_dim`
    pub log_std: Var,
    /// `n x 1`
    pub value: Var,
}

impl ActorCritic {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let (actor_encoder, critic_encoder) = match config.mode {
            EncoderMode::Graph => (
                Some(GraphEncoder::new(&mut store, "actor.gcn", config.gcn_layers, config.node_embed_dim, &mut rng)),
                Some(GraphEncoder::new(&mut store, "critic.gcn", config.gcn_layers, config.node_embed_dim, &mut rng)),
            ),
            EncoderMode::FlatMlp => (None, None),
        };
        let features = config.feature_dim();
        let actor = Mlp::new(
            &mut store,
            "actor.mlp",
            features,
            config.mlp_hidden,
            config.action_dim,
            config.mlp_layers,
            0.01,
            &mut rng,
        );
        let critic = Mlp::new(&mut store, "critic.mlp", features, config.mlp_hidden, 1, config.mlp_layers, 1.0, &mut rng);
        let log_std = store.add("actor.log_std", Matrix::filled(1, config.action_dim, config.init_log_std));
        Ok(Self {
            config,
            store,
            actor_encoder,
            critic_encoder,
            actor,
            critic,
            log_std,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn log_std(&self) -> Vec<f64> {
        self.store.value(self.log_std).data.clone()
    }

    fn features(&self, tape: &mut Tape, store: &ParamStore, encoder: Option<&GraphEncoder>, inputs: &[&EncodedInput]) -> Result<Var> {
        match encoder {
            None => {
                let dim = self.config.flat_input_dim;
                let mut data = Vec::with_capacity(inputs.len() * dim);
                for input in inputs {
                    match input {
                        EncodedInput::Flat(x) if x.len() == dim => data.extend_from_slice(x),
                        EncodedInput::Flat(x) => {
                            return Err(Error::shape(format!("flat input of length {}, expected {dim}", x.len())))
                        }
                        EncodedInput::Graph { .. } => return Err(Error::shape("graph input given to a flat network")),
                    }
                }
                Ok(tape.constant(Matrix::from_vec(inputs.len(), dim, data)))
            }
            Some(encoder) => {
                let mut rows = Vec::with_capacity(inputs.len());
                for input in inputs {
                    let EncodedInput::Graph { original, current } = input else {
                        return Err(Error::shape("flat input given to a graph network"));
                    };
                    let a0 = tape.constant((**original).clone());
                    let a1 = tape.constant((**current).clone());
                    let e0 = encoder.forward(tape, store, a0);
                    let e1 = encoder.forward(tape, store, a1);
                    rows.push(tape.concat_cols(&[e0, e1]));
                }
                Ok(tape.stack_rows(&rows))
            }
        }
    }

    /// Records the forward pass for a batch using `store` as the parameter
    /// values (normally [`params`](Self::params)).
    pub fn forward_with(&self, tape: &mut Tape, store: &ParamStore, inputs: &[&EncodedInput]) -> Result<BatchOutput> {
        if inputs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let actor_features = self.features(tape, store, self.actor_encoder.as_ref(), inputs)?;
        let critic_features = match self.config.mode {
            EncoderMode::FlatMlp => actor_features,
            EncoderMode::Graph => self.features(tape, store, self.critic_encoder.as_ref(), inputs)?,
        };
        let mean = self.actor.forward(tape, store, actor_features);
        let value = self.critic.forward(tape, store, critic_features);
        let log_std = tape.param(store, self.log_std);
        Ok(BatchOutput { mean, log_std, value })
    }

    pub fn forward(&self, tape: &mut Tape, inputs: &[&EncodedInput]) -> Result<BatchOutput> {
        self.forward_with(tape, &self.store, inputs)
    }

    /// Action distribution and state value for one input.
    pub fn evaluate(&self, input: &EncodedInput) -> Result<(DiagGaussian, f64)> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, &[input])?;
        let dist = DiagGaussian::new(tape.value(out.mean).data.clone(), tape.value(out.log_std).data.clone());
        Ok((dist, tape.value(out.value).scalar()))
    }

    pub fn value(&self, input: &EncodedInput) -> Result<f64> {
        self.evaluate(input).map(|(_, v)| v)
    }

    /// The actor's feature vector for an observation: the flattened tensors
    /// in flat mode, the two concatenated graph embeddings in graph mode.
    pub fn encode_observation(&self, obs: Observation<'_>) -> Result<Vec<f64>> {
        let input = prepare_input(obs, &self.config)?;
        let mut tape = Tape::new();
        let f = self.features(&mut tape, &self.store, self.actor_encoder.as_ref(), &[&input])?;
        Ok(tape.value(f).data.clone())
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        let checkpoint = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            metadata,
            params: self
                .store
                .blocks()
                .iter()
                .map(|b| StoredBlock {
                    name: b.name.clone(),
                    shape: [b.value.rows, b.value.cols],
                    values: b.value.data.clone(),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&checkpoint).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(parse_err(format!("unsupported checkpoint version {}", checkpoint.version)));
        }
        let mut model = Self::new(checkpoint.config)?;
        if checkpoint.params.len() != model.store.len() {
            return Err(parse_err(format!(
                "checkpoint has {} parameter blocks, network has {}",
                checkpoint.params.len(),
                model.store.len()
            )));
        }
        for stored in checkpoint.params {
            let id = model
                .store
                .id(&stored.name)
                .ok_or_else(|| parse_err(format!("unknown parameter block {}", stored.name)))?;
            let target = model.store.value_mut(id);
            if [target.rows, target.cols] != stored.shape || stored.values.len() != target.len() {
                return Err(parse_err(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    stored.name,
                    stored.shape,
                    [target.rows, target.cols]
                )));
            }
            target.data = stored.values;
        }
        model.store.check_finite()?;
        Ok((model, checkpoint.metadata))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: NetworkConfig,
    #[serde(default)]
    metadata: serde_json::Value,
    params: Vec<StoredBlock>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredBlock {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{sample_random_game, GameSpec};

    fn obs_pair(spec: &[usize], seed: u64) -> (NormalFormGame, NormalFormGame) {
        let a = sample_random_game(&GameSpec::new(spec.to_vec()), seed).unwrap();
        let b = sample_random_game(&GameSpec::new(spec.to_vec()), seed + 1).unwrap();
        (a, b)
    }

    #[test]
    fn flat_encoding_length() {
        let (a, b) = obs_pair(&[5, 5], 0);
        let net = ActorCritic::new(NetworkConfig::flat(&[5, 5], 10)).unwrap();
        let f = net.encode_observation(Observation { original: &a, current: &b }).unwrap();
        assert_eq!(f.len(), 100);
        let (c, d) = obs_pair(&[4, 5], 0);
        assert!(net.encode_observation(Observation { original: &c, current: &d }).is_err());
    }

    #[test]
    fn graph_encoding_length_and_symmetry() {
        let net = ActorCritic::new(NetworkConfig::graph(10)).unwrap();
        for spec in [vec![2, 2], vec![5, 5], vec![2, 3, 4], vec![4, 4, 4]] {
            let (a, b) = obs_pair(&spec, 3);
            let f = net.encode_observation(Observation { original: &a, current: &b }).unwrap();
            assert_eq!(f.len(), 40);
            let same = net.encode_observation(Observation { original: &a, current: &a }).unwrap();
            assert_eq!(same[..20], same[20..]);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = ActorCritic::new(NetworkConfig { seed: 4, ..NetworkConfig::graph(6) }).unwrap();
        net.save(&path, serde_json::json!({"env_steps": 12})).unwrap();
        let (loaded, meta) = ActorCritic::load(&path).unwrap();
        assert_eq!(meta["env_steps"], 12);
        assert_eq!(loaded.params().flat_values(), net.params().flat_values());

        let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        doc["params"][1]["shape"] = serde_json::json!([2, 20]);
        std::fs::write(&path, doc.to_string()).unwrap();
        assert!(matches!(ActorCritic::load(&path), Err(Error::Parse { .. })));
    }
}
