use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::env::Observation;
use crate::error::Result;
use crate::game::{sample_random_game, GameSpec};
use crate::nn::{
    entropy_on_tape, grad_check, log_prob_on_tape, prepare_input, ActorCritic, EncodedInput, GcnLayer, GradCheckReport,
    GraphEncoder, Linear, Matrix, Mlp, NetworkConfig, ParamStore, Tape, Var, DEFAULT_EPS,
};
use crate::ppo::{ppo_loss, PpoBatch, PpoConfig};

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let u = Uniform::new(-1.0, 1.0).expect("valid range");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| u.sample(rng)).collect())
}

fn weighted_sum(tape: &mut Tape, y: Var, weights: &Matrix) -> Var {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(y, w);
    tape.sum_all(prod)
}

/// Gradient checks, with finite-difference step 1e-5, of each layer type on
/// random inputs and of the PPO loss through flat and graph networks.
pub fn grad_check_suite(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut store = ParamStore::new();
    let linear = Linear::new(&mut store, "linear", 4, 3, 1.0, &mut rng);
    store.value_mut(linear.bias).data = random_matrix(1, 3, &mut rng).data;
    let (x, w) = (random_matrix(5, 4, &mut rng), random_matrix(5, 3, &mut rng));
    out.push((
        "linear".to_string(),
        grad_check(&store, DEFAULT_EPS, |tape, s| {
            let xv = tape.constant(x.clone());
            let y = linear.forward(tape, s, xv);
            Ok(weighted_sum(tape, y, &w))
        })?,
    ));

    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "mlp", 6, 16, 3, 3, 1.0, &mut rng);
    let (x, w) = (random_matrix(4, 6, &mut rng), random_matrix(4, 3, &mut rng));
    out.push((
        "mlp_tanh".to_string(),
        grad_check(&store, DEFAULT_EPS, |tape, s| {
            let xv = tape.constant(x.clone());
            let y = mlp.forward(tape, s, xv);
            Ok(weighted_sum(tape, y, &w))
        })?,
    ));

    let mut store = ParamStore::new();
    let gcn = GcnLayer::new(&mut store, "gcn", 3, 5, &mut rng);
    let raw = random_matrix(6, 6, &mut rng).map(|v| v.abs() + 0.1);
    let adj = raw.zip_map(&raw.transpose(), |a, b| 0.5 * (a + b));
    let (h, w) = (random_matrix(6, 3, &mut rng), random_matrix(6, 5, &mut rng));
    out.push((
        "gcn_relu".to_string(),
        grad_check(&store, DEFAULT_EPS, |tape, s| {
            let a = tape.constant(adj.clone());
            let hv = tape.constant(h.clone());
            let y = gcn.forward(tape, s, a, hv);
            Ok(weighted_sum(tape, y, &w))
        })?,
    ));

    let mut store = ParamStore::new();
    let encoder = GraphEncoder::new(&mut store, "encoder", 2, 8, &mut rng);
    let game = sample_random_game(&GameSpec::new(vec![3, 3]), seed)?;
    let config = NetworkConfig::graph(1);
    let adj = (*crate::nn::graph_adjacency(&game, &config)?).clone();
    let w = random_matrix(1, 8, &mut rng);
    out.push((
        "graph_encoder_mean_pool".to_string(),
        grad_check(&store, DEFAULT_EPS, |tape, s| {
            let a = tape.constant(adj.clone());
            let y = encoder.forward(tape, s, a);
            Ok(weighted_sum(tape, y, &w))
        })?,
    ));

    let mut store = ParamStore::new();
    let mean = store.add("mean", random_matrix(4, 3, &mut rng));
    let log_std = store.add("log_std", random_matrix(1, 3, &mut rng).map(|v| 0.5 * v));
    let actions = random_matrix(4, 3, &mut rng);
    out.push((
        "gaussian_head".to_string(),
        grad_check(&store, DEFAULT_EPS, |tape, s| {
            let m = tape.param(s, mean);
            let ls = tape.param(s, log_std);
            let lp = log_prob_on_tape(tape, m, ls, &actions);
            let lp = tape.sum_all(lp);
            let h = entropy_on_tape(tape, ls);
            let h = tape.scale(h, 0.3);
            Ok(tape.add(lp, h))
        })?,
    ));

    for (name, network) in [
        ("ppo_loss_flat", NetworkConfig::flat(&[2, 3], 4)),
        ("ppo_loss_graph", NetworkConfig::graph(4)),
    ] {
        let model = ActorCritic::new(NetworkConfig { seed, ..network })?;
        let spec = GameSpec::new(vec![2, 3]);
        let inputs = (0..3)
            .map(|i| {
                let a = sample_random_game(&spec, seed.wrapping_add(100 + i))?;
                let b = sample_random_game(&spec, seed.wrapping_add(200 + i))?;
                prepare_input(Observation { original: &a, current: &b }, model.config())
            })
            .collect::<Result<Vec<EncodedInput>>>()?;
        let refs: Vec<&EncodedInput> = inputs.iter().collect();
        let actions = random_matrix(3, 4, &mut rng);
        // Old log-probabilities near the current ones keep the importance
        // ratios inside the clip range, where the loss is smooth.
        let tape_lp = {
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &refs)?;
            let lp = log_prob_on_tape(&mut tape, out.mean, out.log_std, &actions);
            tape.value(lp).data.clone()
        };
        let old: Vec<f64> = tape_lp.iter().map(|lp| lp + 0.05 * random_matrix(1, 1, &mut rng).data[0]).collect();
        let adv = random_matrix(1, 3, &mut rng).data;
        let ret = random_matrix(1, 3, &mut rng).data;
        let config = PpoConfig::default();
        out.push((
            name.to_string(),
            grad_check(model.params(), DEFAULT_EPS, |tape, store| {
                let batch = PpoBatch {
                    inputs: &refs,
                    actions: &actions,
                    old_log_probs: &old,
                    advantages: &adv,
                    returns: &ret,
                };
                Ok(ppo_loss(tape, &model, store, batch, &config)?.total)
            })?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let results = grad_check_suite(7).unwrap();
        assert_eq!(results.len(), 7);
        for (name, report) in results {
            assert!(report.max_rel_error <= 1e-4, "{name}: {report:?}");
        }
    }
}
