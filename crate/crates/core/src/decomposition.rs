//! CP (canonical polyadic) decomposition of payoff tensors and the
//! weight-driven reconstruction used to modify games.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::NormalFormGame;

pub const DEFAULT_RANK: usize = 10;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-7;
const RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpConfig {
    pub rank: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CpConfig {
    fn default() -> Self {
        Self {
            rank: DEFAULT_RANK,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed: 0,
        }
    }
}

/// Rank-`r` factor matrices, one per tensor mode (`extent x r`, row-major),
/// with component weights absorbed so the base weight vector is all ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFactors {
    shape: Vec<usize>,
    rank: usize,
    factors: Vec<Vec<f64>>,
    base_weights: Vec<f64>,
    /// Relative Frobenius error after each sweep.
    error_history: Vec<f64>,
}

impl CpFactors {
    pub fn from_factors(shape: Vec<usize>, rank: usize, factors: Vec<Vec<f64>>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("CP rank must be at least 1"));
        }
        if factors.len() != shape.len() {
            return Err(Error::shape(format!(
                "{} factor matrices for a {}-mode tensor",
                factors.len(),
                shape.len()
            )));
        }
        for (d, (f, &extent)) in factors.iter().zip(&shape).enumerate() {
            if f.len() != extent * rank {
                return Err(Error::shape(format!(
                    "factor {d} has {} entries, expected {extent} x {rank}",
                    f.len()
                )));
            }
        }
        Ok(Self {
            shape,
            rank,
            factors,
            base_weights: vec![1.0; rank],
            error_history: Vec::new(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn error_history(&self) -> &[f64] {
        &self.error_history
    }

    /// Relative reconstruction error reached by the decomposition, or NaN for
    /// factors that were supplied directly.
    pub fn relative_error(&self) -> f64 {
        self.error_history.last().copied().unwrap_or(f64::NAN)
    }

    /// `sum_i weights[i] * f_{1,i} (x) ... (x) f_{D,i}` as a dense row-major
    /// tensor of the source shape.
    pub fn reconstruct(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.rank {
            return Err(Error::shape(format!(
                "{} weights for a rank-{} decomposition",
                weights.len(),
                self.rank
            )));
        }
        Ok(reconstruct_raw(&self.shape, self.rank, &self.factors, weights))
    }
}

fn reconstruct_raw(shape: &[usize], rank: usize, factors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let numel: usize = shape.iter().product();
    let mut out = vec![0.0; numel];
    let mut index = vec![0usize; shape.len()];
    let mut term = vec![0.0; rank];
    for value in out.iter_mut() {
        term.copy_from_slice(weights);
        for (d, &i) in index.iter().enumerate() {
            let row = &factors[d][i * rank..(i + 1) * rank];
            for (t, &f) in term.iter_mut().zip(row) {
                *t *= f;
            }
        }
        *value = term.iter().sum();
        advance(&mut index, shape);
    }
    out
}

fn advance(index: &mut [usize], shape: &[usize]) {
    for d in (0..shape.len()).rev() {
        index[d] += 1;
        if index[d] < shape[d] {
            return;
        }
        index[d] = 0;
    }
}

fn frobenius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Decomposes the game's payoff tensor by alternating least squares.
pub fn cp_decompose(game: &NormalFormGame, config: &CpConfig) -> Result<CpFactors> {
    cp_decompose_tensor(&game.shape(), game.payoffs(), config)
}

pub fn cp_decompose_tensor(shape: &[usize], tensor: &[f64], config: &CpConfig) -> Result<CpFactors> {
    let rank = config.rank;
    if rank == 0 {
        return Err(Error::invalid("CP rank must be at least 1"));
    }
    if tensor.len() != shape.iter().product::<usize>() {
        return Err(Error::shape("tensor length does not match its shape"));
    }
    let modes = shape.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut factors: Vec<Vec<f64>> = shape
        .iter()
        .map(|&extent| (0..extent * rank).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut weights = vec![1.0; rank];
    let norm = frobenius(tensor);
    let relative = |factors: &[Vec<f64>], weights: &[f64]| {
        let approx = reconstruct_raw(shape, rank, factors, weights);
        let diff: f64 = approx
            .iter()
            .zip(tensor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            diff / norm
        } else {
            diff
        }
    };

    let mut history = Vec::new();
    let mut previous = f64::INFINITY;
    for _ in 0..config.max_iters {
        for mode in 0..modes {
            let gram = hadamard_gram(&factors, rank, mode);
            let mttkrp = mttkrp(shape, tensor, &factors, rank, mode);
            let mut updated = solve_normal_equations(&gram, &mttkrp, rank, shape[mode]);
            // pull column norms out into the weights
            for (r, w) in weights.iter_mut().enumerate() {
                let col_norm = (0..shape[mode])
                    .map(|i| updated[i * rank + r].powi(2))
                    .sum::<f64>()
                    .sqrt();
                *w = col_norm;
                if col_norm > 0.0 {
                    for i in 0..shape[mode] {
                        updated[i * rank + r] /= col_norm;
                    }
                }
            }
            factors[mode] = updated;
        }
        let err = relative(&factors, &weights);
        history.push(err);
        if previous - err < config.tol || err < 1e-15 {
            break;
        }
        previous = err;
    }

    // absorb weights into the first mode so the base weights are all ones
    for i in 0..shape[0] {
        for (r, &w) in weights.iter().enumerate() {
            factors[0][i * rank + r] *= w;
        }
    }
    let mut out = CpFactors::from_factors(shape.to_vec(), rank, factors)?;
    out.error_history = history;
    Ok(out)
}

/// Elementwise product of `A_d^T A_d` over every mode except `skip`.
fn hadamard_gram(factors: &[Vec<f64>], rank: usize, skip: usize) -> Vec<f64> {
    let mut gram = vec![1.0; rank * rank];
    for (d, f) in factors.iter().enumerate() {
        if d == skip {
            continue;
        }
        let extent = f.len() / rank;
        for p in 0..rank {
            for q in p..rank {
                let dot: f64 = (0..extent).map(|i| f[i * rank + p] * f[i * rank + q]).sum();
                gram[p * rank + q] *= dot;
                if p != q {
                    gram[q * rank + p] *= dot;
                }
            }
        }
    }
    gram
}

/// Matricized tensor times Khatri-Rao product for one mode.
fn mttkrp(shape: &[usize], tensor: &[f64], factors: &[Vec<f64>], rank: usize, mode: usize) -> Vec<f64> {
    let mut out = vec![0.0; shape[mode] * rank];
    let mut index = vec![0usize; shape.len()];
    let mut term = vec![0.0; rank];
    for &x in tensor {
        if x != 0.0 {
            term.iter_mut().for_each(|t| *t = x);
            for (d, &i) in index.iter().enumerate() {
                if d == mode {
                    continue;
                }
                let row = &factors[d][i * rank..(i + 1) * rank];
                for (t, &f) in term.iter_mut().zip(row) {
                    *t *= f;
                }
            }
            let target = &mut out[index[mode] * rank..(index[mode] + 1) * rank];
            for (o, t) in target.iter_mut().zip(&term) {
                *o += t;
            }
        }
        advance(&mut index, shape);
    }
    out
}

/// Solves `A * G = M` for `A` (`rows x rank`) with `G` symmetric PSD, using a
/// ridge-damped Cholesky factorization.
fn solve_normal_equations(gram: &[f64], rhs: &[f64], rank: usize, rows: usize) -> Vec<f64> {
    let scale = (0..rank).map(|i| gram[i * rank + i]).fold(0.0, f64::max).max(1.0);
    let mut ridge = RIDGE * scale;
    let chol = loop {
        let mut g = gram.to_vec();
        for i in 0..rank {
            g[i * rank + i] += ridge;
        }
        if let Some(l) = cholesky(&g, rank) {
            break l;
        }
        ridge *= 10.0;
    };
    let mut out = vec![0.0; rows * rank];
    let mut y = vec![0.0; rank];
    for row in 0..rows {
        let b = &rhs[row * rank..(row + 1) * rank];
        // forward: L y = b
        for i in 0..rank {
            let s: f64 = (0..i).map(|j| chol[i * rank + j] * y[j]).sum();
            y[i] = (b[i] - s) / chol[i * rank + i];
        }
        // back: L^T x = y
        let x = &mut out[row * rank..(row + 1) * rank];
        for i in (0..rank).rev() {
            let s: f64 = (i + 1..rank).map(|j| chol[j * rank + i] * x[j]).sum();
            x[i] = (y[i] - s) / chol[i * rank + i];
        }
    }
    out
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// One modification step: `M_t = normalize(M_{t-1} + step * R(weights))`.
pub fn apply_modification(
    current: &NormalFormGame,
    factors: &CpFactors,
    weights: &[f64],
    step: f64,
) -> Result<NormalFormGame> {
    if current.shape() != factors.shape() {
        return Err(Error::shape(format!(
            "game shape {:?} does not match decomposition shape {:?}",
            current.shape(),
            factors.shape()
        )));
    }
    let delta = factors.reconstruct(weights)?;
    let payoffs = current
        .payoffs()
        .iter()
        .zip(&delta)
        .map(|(m, d)| m + step * d)
        .collect();
    Ok(current.with_payoffs(payoffs)?.normalize_payoffs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{sample_random_game, GameSpec};

    #[test]
    fn rank_one_recovery() {
        let game = NormalFormGame::constant(vec![3, 4], 2.0).unwrap();
        let cp = cp_decompose(&game, &CpConfig { rank: 1, ..CpConfig::default() }).unwrap();
        assert!(cp.relative_error() <= 1e-6, "{}", cp.relative_error());
        assert_eq!(cp.base_weights(), &[1.0]);
    }

    #[test]
    fn random_game_rank_ten() {
        let game = sample_random_game(&GameSpec::new(vec![5, 5]), 3).unwrap();
        let cp = cp_decompose(&game, &CpConfig::default()).unwrap();
        assert!(cp.relative_error() <= 0.05, "{}", cp.relative_error());
        let approx = cp.reconstruct(cp.base_weights()).unwrap();
        let diff: f64 = approx
            .iter()
            .zip(game.payoffs())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let rel = diff / frobenius(game.payoffs());
        assert!((rel - cp.relative_error()).abs() < 1e-12);
    }

    #[test]
    fn decomposition_is_seeded() {
        let game = sample_random_game(&GameSpec::new(vec![2, 3, 2]), 8).unwrap();
        let config = CpConfig { seed: 42, ..CpConfig::default() };
        assert_eq!(cp_decompose(&game, &config).unwrap(), cp_decompose(&game, &config).unwrap());
    }

    #[test]
    fn error_history_nonincreasing() {
        for seed in 0..5 {
            let game = sample_random_game(&GameSpec::new(vec![4, 3]), seed).unwrap();
            let cp = cp_decompose(&game, &CpConfig { rank: 3, seed, ..CpConfig::default() }).unwrap();
            for w in cp.error_history().windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", cp.error_history());
            }
        }
    }

    #[test]
    fn zero_tensor_decomposes_to_zero() {
        let game = NormalFormGame::constant(vec![2, 2], 0.0).unwrap();
        let cp = cp_decompose(&game, &CpConfig::default()).unwrap();
        let r = cp.reconstruct(&[1.0; 10]).unwrap();
        assert!(r.iter().all(|x| x.is_finite() && x.abs() < 1e-12));
    }

    #[test]
    fn reconstruction_basics() {
        let ones = CpFactors::from_factors(vec![2, 2, 3], 1, vec![vec![1.0; 2], vec![1.0; 2], vec![1.0; 3]]).unwrap();
        assert_eq!(ones.reconstruct(&[2.0]).unwrap(), vec![2.0; 12]);
        assert_eq!(ones.reconstruct(&[0.0]).unwrap(), vec![0.0; 12]);
        assert!(matches!(ones.reconstruct(&[1.0, 1.0]), Err(Error::Shape(_))));
        assert!(CpFactors::from_factors(vec![2, 2], 1, vec![vec![1.0; 2]]).is_err());
    }

    #[test]
    fn modification_steps() {
        let game = sample_random_game(&GameSpec::new(vec![3, 3]), 1).unwrap();
        let cp = cp_decompose(&game, &CpConfig::default()).unwrap();
        let same = apply_modification(&game, &cp, &[0.0; 10], 5.0).unwrap();
        for (a, b) in same.payoffs().iter().zip(game.payoffs()) {
            assert!((a - b).abs() < 1e-12);
        }

        let zero = NormalFormGame::constant(vec![2, 2], 0.0).unwrap();
        let ones = CpFactors::from_factors(vec![2, 2, 2], 1, vec![vec![1.0; 2]; 3]).unwrap();
        let out = apply_modification(&zero, &ones, &[1.0], 5.0).unwrap();
        assert!(out.payoffs().iter().all(|&x| x == 0.0));

        let wrong = NormalFormGame::constant(vec![2, 3], 0.0).unwrap();
        assert!(apply_modification(&wrong, &ones, &[1.0], 5.0).is_err());
    }
}
