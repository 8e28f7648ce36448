use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::Matrix;
use super::tape::{Tape, Var};

pub const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian over action vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len());
        Self { mean, log_std }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s.exp() * z
            })
            .collect()
    }

    pub fn log_prob(&self, action: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(action)
            .map(|((&m, &s), &a)| {
                let z = (a - m) / s.exp();
                -0.5 * z * z - s - HALF_LOG_TWO_PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|&s| 0.5 + HALF_LOG_TWO_PI + s).sum()
    }
}

/// Per-row log-density on the tape: `mean` is `n x r`, `log_std` is `1 x r`,
/// `actions` holds the sampled actions. Returns `n x 1`.
pub fn log_prob_on_tape(tape: &mut Tape, mean: Var, log_std: Var, actions: &Matrix) -> Var {
    let (n, r) = tape.value(mean).shape();
    let a = tape.constant(actions.clone());
    let diff = tape.sub(a, mean);
    let neg_log_std = tape.scale(log_std, -1.0);
    let inv_std = tape.exp(neg_log_std);
    let inv_std = tape.broadcast(inv_std, n, r);
    let z = tape.mul(diff, inv_std);
    let z2 = tape.square(z);
    let quad = tape.sum_cols(z2);
    let quad = tape.scale(quad, -0.5);
    let log_std_sum = tape.sum_all(log_std);
    let log_std_sum = tape.broadcast(log_std_sum, n, 1);
    let out = tape.sub(quad, log_std_sum);
    tape.add_scalar(out, -HALF_LOG_TWO_PI * r as f64)
}

/// Entropy of the diagonal Gaussian as a `1 x 1` node.
pub fn entropy_on_tape(tape: &mut Tape, log_std: Var) -> Var {
    let r = tape.value(log_std).cols;
    let s = tape.sum_all(log_std);
    tape.add_scalar(s, (0.5 + HALF_LOG_TWO_PI) * r as f64)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn standard_normal_closed_forms() {
        let d = DiagGaussian::new(vec![0.0], vec![0.0]);
        assert!((d.log_prob(&[0.0]) + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        assert!((d.log_prob(&[0.0]) + 0.9189).abs() < 1e-4);
        assert!((d.entropy() - 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln())).abs() < 1e-15);
        assert!((d.entropy() - 1.4189).abs() < 1e-4);
    }

    #[test]
    fn closed_forms_on_fixed_inputs() {
        let d = DiagGaussian::new(vec![0.3, -1.0], vec![-0.5, 0.2]);
        let a = [0.1, 0.4];
        let expected: f64 = (0..2)
            .map(|i| {
                let s = d.log_std[i].exp();
                -0.5 * ((a[i] - d.mean[i]) / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum();
        assert!((d.log_prob(&a) - expected).abs() < 1e-12);

        let mut tape = Tape::new();
        let mean = tape.constant(Matrix::row_vector(d.mean.clone()));
        let log_std = tape.constant(Matrix::row_vector(d.log_std.clone()));
        let lp = log_prob_on_tape(&mut tape, mean, log_std, &Matrix::row_vector(a.to_vec()));
        assert!((tape.value(lp).scalar() - expected).abs() < 1e-12);
        let h = entropy_on_tape(&mut tape, log_std);
        assert!((tape.value(h).scalar() - d.entropy()).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let d = DiagGaussian::new(vec![0.0; 4], vec![0.0; 4]);
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(5));
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
