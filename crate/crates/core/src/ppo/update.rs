use rand::seq::SliceRandom;
use rand::Rng;

use super::adam::Adam;
use super::buffer::RolloutBuffer;
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::nn::{entropy_on_tape, log_prob_on_tape, ActorCritic, EncodedInput, Matrix, ParamStore, Tape, Var};

/// One minibatch of stored transitions.
#[derive(Debug, Clone, Copy)]
pub struct PpoBatch<'a> {
    pub inputs: &'a [&'a EncodedInput],
    /// `n x action_dim`
    pub actions: &'a Matrix,
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

/// Nodes of the PPO objective recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct PpoLoss {
    pub total: Var,
    pub policy: Var,
    pub value: Var,
    pub entropy: Var,
    /// Importance ratios, `n x 1`.
    pub ratio: Var,
}

/// Clipped surrogate plus value and entropy terms:
/// `-mean(min(r A, clip(r, 1-e, 1+e) A)) + c_v mean((V - G)^2) - c_h H`.
pub fn ppo_loss(
    tape: &mut Tape,
    model: &ActorCritic,
    store: &ParamStore,
    batch: PpoBatch<'_>,
    config: &PpoConfig,
) -> Result<PpoLoss> {
    let n = batch.inputs.len();
    let out = model.forward_with(tape, store, batch.inputs)?;
    let log_prob = log_prob_on_tape(tape, out.mean, out.log_std, batch.actions);
    let old = tape.constant(Matrix::column_vector(batch.old_log_probs.to_vec()));
    let log_ratio = tape.sub(log_prob, old);
    let ratio = tape.exp(log_ratio);
    let adv = tape.constant(Matrix::column_vector(batch.advantages.to_vec()));
    let unclipped = tape.mul(ratio, adv);
    let clipped_ratio = tape.clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    let clipped = tape.mul(clipped_ratio, adv);
    let surrogate = tape.minimum(unclipped, clipped);
    let surrogate = tape.mean_all(surrogate);
    let policy = tape.scale(surrogate, -1.0);

    let returns = tape.constant(Matrix::column_vector(batch.returns.to_vec()));
    let err = tape.sub(out.value, returns);
    let sq = tape.square(err);
    let value = tape.mean_all(sq);

    let entropy = entropy_on_tape(tape, out.log_std);
    let weighted_value = tape.scale(value, config.value_coef);
    let weighted_entropy = tape.scale(entropy, -config.entropy_coef);
    let total = tape.add(policy, weighted_value);
    let total = tape.add(total, weighted_entropy);
    debug_assert_eq!(tape.value(ratio).rows, n);
    Ok(PpoLoss {
        total,
        policy,
        value,
        entropy,
        ratio,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
    /// Mean importance ratio of the very first minibatch.
    pub first_ratio: f64,
    /// Largest global gradient norm before and after clipping.
    pub max_grad_norm: f64,
    pub max_clipped_grad_norm: f64,
    pub minibatches: usize,
}

/// Runs `ppo_epochs` passes over the rollout in shuffled minibatches of
/// `len / minibatches` transitions; leftover transitions of each shuffle
/// are skipped.
pub fn ppo_update(
    model: &mut ActorCritic,
    optimizer: &mut Adam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateMetrics> {
    if !buffer.has_returns() {
        return Err(Error::invalid("compute returns and advantages before updating"));
    }
    let size = config.minibatch_size(buffer.len())?;
    let mut metrics = UpdateMetrics::default();
    let mut indices: Vec<usize> = (0..buffer.len()).collect();
    let action_dim = model.config().action_dim;
    for _ in 0..config.ppo_epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks_exact(size) {
            let inputs: Vec<&EncodedInput> = chunk.iter().map(|&i| &buffer.inputs[i]).collect();
            let mut actions = Vec::with_capacity(size * action_dim);
            for &i in chunk {
                actions.extend_from_slice(&buffer.actions[i]);
            }
            let actions = Matrix::from_vec(size, action_dim, actions);
            let pick = |v: &[f64]| chunk.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let (old, adv, ret) = (pick(&buffer.log_probs), pick(&buffer.advantages), pick(&buffer.returns));
            let batch = PpoBatch {
                inputs: &inputs,
                actions: &actions,
                old_log_probs: &old,
                advantages: &adv,
                returns: &ret,
            };

            let mut tape = Tape::new();
            let loss = ppo_loss(&mut tape, model, model.params(), batch, config)?;
            let total = tape.value(loss.total).scalar();
            if !total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "PPO loss {total} (policy {}, value {}, entropy {})",
                    tape.value(loss.policy).scalar(),
                    tape.value(loss.value).scalar(),
                    tape.value(loss.entropy).scalar()
                )));
            }
            let store = model.params_mut();
            store.zero_grad();
            tape.backward(loss.total, store)?;
            let norm = store.clip_grad_norm(config.max_grad_norm);
            metrics.max_grad_norm = metrics.max_grad_norm.max(norm);
            metrics.max_clipped_grad_norm = metrics.max_clipped_grad_norm.max(store.grad_norm());
            optimizer.step(store);
            store.check_finite()?;

            let ratios = &tape.value(loss.ratio).data;
            let mean_ratio = ratios.iter().sum::<f64>() / size as f64;
            if metrics.minibatches == 0 {
                metrics.first_ratio = mean_ratio;
            }
            metrics.mean_ratio += mean_ratio;
            metrics.clip_fraction += ratios.iter().filter(|r| (*r - 1.0).abs() > config.clip).count() as f64 / size as f64;
            metrics.policy_loss += tape.value(loss.policy).scalar();
            metrics.value_loss += tape.value(loss.value).scalar();
            metrics.entropy += tape.value(loss.entropy).scalar();
            metrics.minibatches += 1;
        }
    }
    let count = metrics.minibatches.max(1) as f64;
    metrics.policy_loss /= count;
    metrics.value_loss /= count;
    metrics.entropy /= count;
    metrics.clip_fraction /= count;
    metrics.mean_ratio /= count;
    Ok(metrics)
}
