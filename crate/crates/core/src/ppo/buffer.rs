use rand::Rng;

use super::envs::{EpisodeSummary, RolloutEnv};
use crate::error::{Error, Result};
use crate::nn::{ActorCritic, DiagGaussian, EncodedInput, Tape};

/// Transitions of one rollout, stored time-major: entry `t * num_envs + e`
/// is step `t` of environment `e`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub steps: usize,
    pub inputs: Vec<EncodedInput>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value of the state each environment is left in, used to
    /// bootstrap episodes cut off by the end of the rollout.
    pub last_values: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn has_returns(&self) -> bool {
        !self.returns.is_empty()
    }
}

/// Steps every environment `steps` times with actions sampled from the
/// current policy. Environment failures carry the environment index.
pub fn collect_rollouts<E: RolloutEnv>(
    model: &ActorCritic,
    envs: &mut [E],
    steps: usize,
    rng: &mut impl Rng,
) -> Result<RolloutBuffer> {
    if envs.is_empty() || steps == 0 {
        return Err(Error::invalid("a rollout needs at least one environment and one step"));
    }
    let n = envs.len() * steps;
    let mut buffer = RolloutBuffer {
        num_envs: envs.len(),
        steps,
        inputs: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        log_probs: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        last_values: Vec::new(),
        returns: Vec::new(),
        advantages: Vec::new(),
        episodes: Vec::new(),
    };
    for _ in 0..steps {
        let inputs = observe_all(envs)?;
        let (dists, values) = policy_outputs(model, &inputs)?;
        for (index, ((env, dist), input)) in envs.iter_mut().zip(dists).zip(inputs).enumerate() {
            let action = dist.sample(rng);
            let outcome = env.step(&action).map_err(|e| Error::Env {
                index,
                source: Box::new(e),
            })?;
            buffer.log_probs.push(dist.log_prob(&action));
            buffer.actions.push(action);
            buffer.inputs.push(input);
            buffer.rewards.push(outcome.reward);
            buffer.dones.push(outcome.done);
            buffer.episodes.extend(outcome.episode);
        }
        buffer.values.extend(values);
    }
    let last = observe_all(envs)?;
    buffer.last_values = policy_outputs(model, &last)?.1;
    Ok(buffer)
}

fn observe_all<E: RolloutEnv>(envs: &[E]) -> Result<Vec<EncodedInput>> {
    envs.iter()
        .enumerate()
        .map(|(index, env)| {
            env.observe().map_err(|e| Error::Env {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

fn policy_outputs(model: &ActorCritic, inputs: &[EncodedInput]) -> Result<(Vec<DiagGaussian>, Vec<f64>)> {
    let refs: Vec<&EncodedInput> = inputs.iter().collect();
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, &refs)?;
    let means = tape.value(out.mean);
    let log_std = tape.value(out.log_std).data.clone();
    let dists = (0..inputs.len())
        .map(|i| DiagGaussian::new(means.row(i).to_vec(), log_std.clone()))
        .collect();
    Ok((dists, tape.value(out.value).data.clone()))
}

/// Fills discounted returns `G_t = r_t + gamma * G_{t+1}` (restarted at
/// episode ends, seeded with the bootstrap value at the rollout tail) and
/// advantages `G_t - V(s_t)` normalized to zero mean and unit variance.
/// Normalization is skipped when the advantages have (near-)zero spread.
pub fn compute_returns_advantages(buffer: &mut RolloutBuffer, gamma: f64) -> Result<()> {
    if buffer.has_returns() {
        return Err(Error::invalid("returns already computed for this rollout"));
    }
    if buffer.len() != buffer.num_envs * buffer.steps || buffer.last_values.len() != buffer.num_envs {
        return Err(Error::shape("rollout buffer is not full"));
    }
    let (n, envs) = (buffer.len(), buffer.num_envs);
    let mut returns = vec![0.0; n];
    for e in 0..envs {
        let mut g = buffer.last_values[e];
        for t in (0..buffer.steps).rev() {
            let i = t * envs + e;
            g = if buffer.dones[i] {
                buffer.rewards[i]
            } else {
                buffer.rewards[i] + gamma * g
            };
            returns[i] = g;
        }
    }
    let mut advantages: Vec<f64> = returns.iter().zip(&buffer.values).map(|(g, v)| g - v).collect();
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let std = (advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if std >= 1e-8 {
        advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
    }
    buffer.returns = returns;
    buffer.advantages = advantages;
    Ok(())
}
