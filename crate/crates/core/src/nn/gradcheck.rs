use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-5;
/// Denominator floor of the relative error, so entries whose true gradient
/// is (near) zero are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter block and flat index of the worst entry.
    pub worst: (String, usize),
    pub entries_checked: usize,
}

/// Compares reverse-mode gradients of the scalar produced by `f` against
/// central finite differences, entry by entry over every parameter block.
///
/// The relative error of one entry is `|g - n| / max(|g|, |n|, 1e-6)`.
pub fn grad_check<F>(store: &ParamStore, eps: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut analytic = store.clone();
    analytic.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, &analytic)?;
    tape.backward(loss, &mut analytic)?;

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let v = f(&mut tape, s)?;
        Ok(tape.value(v).scalar())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        entries_checked: 0,
    };
    let mut probe = store.clone();
    for id in store.ids() {
        let grad = analytic.block(id).grad();
        for j in 0..store.value(id).len() {
            let original = store.value(id).data[j];
            probe.value_mut(id).data[j] = original + eps;
            let up = eval(&probe)?;
            probe.value_mut(id).data[j] = original - eps;
            let down = eval(&probe)?;
            probe.value_mut(id).data[j] = original;

            let numeric = (up - down) / (2.0 * eps);
            let g = grad.data[j];
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            if rel > report.max_rel_error || report.entries_checked == 0 {
                report.max_rel_error = rel;
                report.worst = (store.block(id).name.clone(), j);
            }
            report.entries_checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};

    use super::*;
    use crate::nn::layers::{GcnLayer, GraphEncoder, Linear, Mlp};
    use crate::nn::matrix::Matrix;
    use crate::nn::policy::{entropy_on_tape, log_prob_on_tape};

    const TOL: f64 = 1e-4;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let u = Uniform::new(-1.0, 1.0).unwrap();
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| u.sample(rng)).collect())
    }

    /// Row-stochastic symmetric-ish adjacency with strictly positive entries.
    fn random_adjacency(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let raw = random_matrix(n, n, rng).map(|x| x.abs() + 0.1);
        raw.zip_map(&raw.transpose(), |a, b| 0.5 * (a + b))
    }

    /// Weighted sum of the outputs, so every output entry has a distinct
    /// upstream gradient.
    fn probe(tape: &mut Tape, y: Var, weights: &Matrix) -> Var {
        let w = tape.constant(weights.clone());
        let prod = tape.mul(y, w);
        tape.sum_all(prod)
    }

    #[test]
    fn square_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::row_vector(vec![3.0]));
        let mut tape = Tape::new();
        let v = tape.param(&store, w);
        let loss = tape.square(v);
        let loss = tape.sum_all(loss);
        tape.backward(loss, &mut store).unwrap();
        assert!((store.block(w).grad().scalar() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn linear_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let layer = Linear::new(&mut store, "l", 4, 3, 1.0, &mut rng);
        store.value_mut(layer.bias).data = vec![0.1, -0.3, 0.2];
        let x = random_matrix(5, 4, &mut rng);
        let weights = random_matrix(5, 3, &mut rng);
        let report = grad_check(&store, DEFAULT_EPS, |tape, s| {
            let xv = tape.constant(x.clone());
            let y = layer.forward(tape, s, xv);
            Ok(probe(tape, y, &weights))
        })
        .unwrap();
        assert!(report.max_rel_error <= TOL, "{report:?}");
        assert_eq!(report.entries_checked, 15);
    }

    #[test]
    fn tanh_mlp() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", 6, 8, 2, 3, 1.0, &mut rng);
        let x = random_matrix(4, 6, &mut rng);
        let weights = random_matrix(4, 2, &mut rng);
        let report = grad_check(&store, DEFAULT_EPS, |tape, s| {
            let xv = tape.constant(x.clone());
            let y = mlp.forward(tape, s, xv);
            Ok(probe(tape, y, &weights))
        })
        .unwrap();
        assert!(report.max_rel_error <= TOL, "{report:?}");
    }

    #[test]
    fn gcn_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let layer = GcnLayer::new(&mut store, "g", 3, 5, &mut rng);
        let adj = random_adjacency(6, &mut rng);
        let h = random_matrix(6, 3, &mut rng);
        let weights = random_matrix(6, 5, &mut rng);
        let report = grad_check(&store, DEFAULT_EPS, |tape, s| {
            let a = tape.constant(adj.clone());
            let hv = tape.constant(h.clone());
            let y = layer.forward(tape, s, a, hv);
            Ok(probe(tape, y, &weights))
        })
        .unwrap();
        assert!(report.max_rel_error <= TOL, "{report:?}");
    }

    #[test]
    fn graph_encoder_with_pooling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let encoder = GraphEncoder::new(&mut store, "e", 2, 7, &mut rng);
        let adj = random_adjacency(9, &mut rng);
        let weights = random_matrix(1, 7, &mut rng);
        let report = grad_check(&store, DEFAULT_EPS, |tape, s| {
            let a = tape.constant(adj.clone());
            let y = encoder.forward(tape, s, a);
            Ok(probe(tape, y, &weights))
        })
        .unwrap();
        assert!(report.max_rel_error <= TOL, "{report:?}");
    }

    #[test]
    fn gaussian_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let mean = store.add("mean", random_matrix(4, 3, &mut rng));
        let log_std = store.add("log_std", random_matrix(1, 3, &mut rng).map(|x| 0.5 * x));
        let actions = random_matrix(4, 3, &mut rng);
        let report = grad_check(&store, DEFAULT_EPS, |tape, s| {
            let m = tape.param(s, mean);
            let ls = tape.param(s, log_std);
            let lp = log_prob_on_tape(tape, m, ls, &actions);
            let lp = tape.sum_all(lp);
            let h = entropy_on_tape(tape, ls);
            let h = tape.scale(h, 0.3);
            Ok(tape.add(lp, h))
        })
        .unwrap();
        assert!(report.max_rel_error <= TOL, "{report:?}");
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::row_vector(vec![1.5, -2.0]));
        let mut tape = Tape::new();
        let v = tape.param(&store, w);
        let loss = tape.scale(v, 0.0);
        let loss = tape.sum_all(loss);
        tape.backward(loss, &mut store).unwrap();
        assert!(store.block(w).grad().data.iter().all(|&g| g == 0.0));
    }
}
