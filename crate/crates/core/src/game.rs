//! Normal-form games, strategy profiles and the equilibrium-quality measures
//! evaluated on them.
//!
//! Payoffs are stored as one dense tensor of shape `[K, |A^1|, ..., |A^K|]`
//! in row-major order, so the payoff of player `k` at joint action index `j`
//! lives at `k * num_joint + j`. Joint actions are indexed row-major over
//! `(a^1, ..., a^K)` with the last player varying fastest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating probability vectors.
pub const PROB_TOL: f64 = 1e-9;

/// Lower and upper end of the normalized payoff range.
pub const PAYOFF_MIN: f64 = -5.0;
pub const PAYOFF_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormGame {
    action_counts: Vec<usize>,
    payoffs: Vec<f64>,
}

impl NormalFormGame {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<f64>) -> Result<Self> {
        if action_counts.len() < 2 {
            return Err(Error::invalid(format!(
                "a game needs at least 2 players, got {}",
                action_counts.len()
            )));
        }
        if action_counts.iter().any(|&n| n == 0) {
            return Err(Error::invalid("every player needs at least one action"));
        }
        let expected = action_counts.len() * action_counts.iter().product::<usize>();
        if payoffs.len() != expected {
            return Err(Error::shape(format!(
                "payoff tensor has {} entries, shape {:?} needs {}",
                payoffs.len(),
                tensor_shape(&action_counts),
                expected
            )));
        }
        if let Some(bad) = payoffs.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("payoff entry {bad}")));
        }
        Ok(Self { action_counts, payoffs })
    }

    /// Builds a two-player game from the row player's and column player's
    /// payoff matrices.
    pub fn bimatrix(row: &[Vec<f64>], col: &[Vec<f64>]) -> Result<Self> {
        let n = row.len();
        let m = row.first().map_or(0, Vec::len);
        if col.len() != n || row.iter().chain(col).any(|r| r.len() != m) {
            return Err(Error::shape("bimatrix payoff matrices must share one shape"));
        }
        let mut payoffs = Vec::with_capacity(2 * n * m);
        payoffs.extend(row.iter().flatten().copied());
        payoffs.extend(col.iter().flatten().copied());
        Self::new(vec![n, m], payoffs)
    }

    /// Every entry of every player's payoff equals `value`.
    pub fn constant(action_counts: Vec<usize>, value: f64) -> Result<Self> {
        let len = action_counts.len() * action_counts.iter().product::<usize>();
        Self::new(action_counts, vec![value; len])
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_joint(&self) -> usize {
        self.action_counts.iter().product()
    }

    /// Shape of the payoff tensor, `[K, |A^1|, ..., |A^K|]`.
    pub fn shape(&self) -> Vec<usize> {
        tensor_shape(&self.action_counts)
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn into_payoffs(self) -> Vec<f64> {
        self.payoffs
    }

    pub fn payoff(&self, player: usize, joint: usize) -> f64 {
        self.payoffs[player * self.num_joint() + joint]
    }

    /// Payoffs of `player` over all joint actions.
    pub fn player_payoffs(&self, player: usize) -> &[f64] {
        let n = self.num_joint();
        &self.payoffs[player * n..(player + 1) * n]
    }

    pub fn payoff_mut(&mut self, player: usize, joint: usize) -> &mut f64 {
        let n = self.num_joint();
        &mut self.payoffs[player * n + joint]
    }

    /// Row-major strides of each player's action within a joint index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.num_players()];
        for k in (0..self.num_players().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.action_counts[k + 1];
        }
        strides
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.num_players());
        actions
            .iter()
            .zip(&self.action_counts)
            .fold(0, |acc, (&a, &n)| acc * n + a)
    }

    pub fn joint_actions(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_players()];
        for k in (0..self.num_players()).rev() {
            out[k] = joint % self.action_counts[k];
            joint /= self.action_counts[k];
        }
        out
    }

    /// Same action structure, new payoff entries.
    pub fn with_payoffs(&self, payoffs: Vec<f64>) -> Result<Self> {
        Self::new(self.action_counts.clone(), payoffs)
    }

    fn check_profile(&self, profile: &MixedProfile) -> Result<()> {
        let ok = profile.per_player.len() == self.num_players()
            && profile
                .per_player
                .iter()
                .zip(&self.action_counts)
                .all(|(p, &n)| p.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "profile with action counts {:?} does not fit game {:?}",
                profile.per_player.iter().map(Vec::len).collect::<Vec<_>>(),
                self.action_counts
            )))
        }
    }

    fn check_joint(&self, joint: &JointDistribution) -> Result<()> {
        if joint.probs.len() == self.num_joint() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "joint distribution of length {} does not fit {} joint actions",
                joint.probs.len(),
                self.num_joint()
            )))
        }
    }

    /// Expected payoff of each pure action of `player` against the other
    /// players' mixed strategies: `u(a) = M^k(a, pi^{-k})`.
    pub fn action_values(&self, profile: &MixedProfile, player: usize) -> Result<Vec<f64>> {
        self.check_profile(profile)?;
        if player >= self.num_players() {
            return Err(Error::invalid(format!("no player {player}")));
        }
        Ok(self.action_values_unchecked(profile, player))
    }

    pub(crate) fn action_values_unchecked(&self, profile: &MixedProfile, player: usize) -> Vec<f64> {
        let k_players = self.num_players();
        let payoffs = self.player_payoffs(player);
        let mut values = vec![0.0; self.action_counts[player]];
        let mut actions = vec![0usize; k_players];
        for &m in payoffs.iter() {
            let mut weight = 1.0;
            for (k, &a) in actions.iter().enumerate() {
                if k != player {
                    weight *= profile.per_player[k][a];
                }
            }
            values[actions[player]] += weight * m;
            // advance the row-major odometer
            for k in (0..k_players).rev() {
                actions[k] += 1;
                if actions[k] < self.action_counts[k] {
                    break;
                }
                actions[k] = 0;
            }
        }
        values
    }

    /// `M^k(pi) = sum_a pi(a) M^k(a)` for a factorized profile.
    pub fn expected_payoff(&self, profile: &MixedProfile, player: usize) -> Result<f64> {
        let values = self.action_values(profile, player)?;
        Ok(dot(&values, &profile.per_player[player]))
    }

    /// Best pure response of `player` and its value. Ties go to the lowest
    /// action index.
    pub fn best_response(&self, profile: &MixedProfile, player: usize) -> Result<(usize, f64)> {
        let values = self.action_values(profile, player)?;
        Ok(argmax_lowest(&values))
    }

    /// NashConv: total gain available to players from unilateral best
    /// responses. Zero exactly at a Nash equilibrium.
    pub fn nash_conv(&self, profile: &MixedProfile) -> Result<f64> {
        self.check_profile(profile)?;
        let total = (0..self.num_players())
            .map(|k| {
                let values = self.action_values_unchecked(profile, k);
                let (_, best) = argmax_lowest(&values);
                best - dot(&values, &profile.per_player[k])
            })
            .sum::<f64>();
        // rounding can push an exact equilibrium a hair below zero
        Ok(total.max(0.0))
    }

    /// Largest expected gain any player obtains by swapping one recommended
    /// action for another under the joint distribution, floored at zero.
    pub fn ce_regret(&self, joint: &JointDistribution) -> Result<f64> {
        self.check_joint(joint)?;
        let strides = self.strides();
        let mut worst = 0.0_f64;
        for k in 0..self.num_players() {
            let n_k = self.action_counts[k];
            // gain[a][b] = sum over a^{-k} of pi(a) (M^k(b, a^{-k}) - M^k(a))
            let mut gain = vec![0.0; n_k * n_k];
            for j in 0..self.num_joint() {
                let p = joint.probs[j];
                if p == 0.0 {
                    continue;
                }
                let a = (j / strides[k]) % n_k;
                let base = j - a * strides[k];
                let here = self.payoff(k, j);
                for b in 0..n_k {
                    gain[a * n_k + b] += p * (self.payoff(k, base + b * strides[k]) - here);
                }
            }
            worst = gain.into_iter().fold(worst, f64::max);
        }
        Ok(worst)
    }

    /// Per-player marginals of a joint distribution, each renormalized.
    pub fn marginalize(&self, joint: &JointDistribution) -> Result<MixedProfile> {
        self.check_joint(joint)?;
        let strides = self.strides();
        let mut per_player: Vec<Vec<f64>> =
            self.action_counts.iter().map(|&n| vec![0.0; n]).collect();
        for (j, &p) in joint.probs.iter().enumerate() {
            for (k, marginal) in per_player.iter_mut().enumerate() {
                marginal[(j / strides[k]) % self.action_counts[k]] += p;
            }
        }
        for marginal in per_player.iter_mut() {
            renormalize(marginal);
        }
        Ok(MixedProfile { per_player })
    }

    /// Affine rescale of every payoff entry into `[-5, 5]`. A constant
    /// tensor maps to all zeros.
    pub fn normalize_payoffs(&self) -> Self {
        let mut payoffs = self.payoffs.clone();
        normalize_in_place(&mut payoffs);
        Self {
            action_counts: self.action_counts.clone(),
            payoffs,
        }
    }
}

pub(crate) fn normalize_in_place(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        values.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let scale = (PAYOFF_MAX - PAYOFF_MIN) / range;
    for x in values.iter_mut() {
        *x = ((*x - lo) * scale + PAYOFF_MIN).clamp(PAYOFF_MIN, PAYOFF_MAX);
    }
}

pub fn tensor_shape(action_counts: &[usize]) -> Vec<usize> {
    std::iter::once(action_counts.len())
        .chain(action_counts.iter().copied())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax_lowest(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Rescales a nonnegative vector to unit mass when it has drifted. Falls back
/// to uniform if the mass vanished.
pub(crate) fn renormalize(p: &mut [f64]) {
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|x| *x = u);
    } else if (total - 1.0).abs() > PROB_TOL {
        p.iter_mut().for_each(|x| *x /= total);
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::invalid(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub per_player: Vec<Vec<f64>>,
}

impl MixedProfile {
    pub fn new(per_player: Vec<Vec<f64>>) -> Result<Self> {
        for (k, p) in per_player.iter().enumerate() {
            check_distribution(p, &format!("strategy of player {k}"))?;
        }
        Ok(Self { per_player })
    }

    pub fn uniform(action_counts: &[usize]) -> Self {
        Self {
            per_player: action_counts
                .iter()
                .map(|&n| vec![1.0 / n as f64; n])
                .collect(),
        }
    }

    pub fn pure(action_counts: &[usize], actions: &[usize]) -> Self {
        Self {
            per_player: action_counts
                .iter()
                .zip(actions)
                .map(|(&n, &a)| {
                    let mut p = vec![0.0; n];
                    p[a] = 1.0;
                    p
                })
                .collect(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.per_player
            .iter()
            .all(|p| check_distribution(p, "").is_ok())
    }

    /// Product distribution `pi(a) = prod_k pi^k(a^k)` over joint actions.
    pub fn to_joint(&self) -> JointDistribution {
        let mut probs = vec![1.0];
        for p in &self.per_player {
            probs = probs
                .iter()
                .flat_map(|&q| p.iter().map(move |&x| q * x))
                .collect();
        }
        JointDistribution { probs }
    }
}

/// Distribution over joint pure actions, row-major over `(a^1, ..., a^K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(&probs, "joint distribution")?;
        Ok(Self { probs })
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(len: usize, index: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn is_valid(&self) -> bool {
        check_distribution(&self.probs, "").is_ok()
    }
}

/// Players and per-player action counts of a game to sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub action_counts: Vec<usize>,
}

impl GameSpec {
    pub fn new(action_counts: Vec<usize>) -> Self {
        Self { action_counts }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.action_counts.len();
        if !(2..=3).contains(&k) {
            return Err(Error::invalid(format!("sampled games have 2 or 3 players, got {k}")));
        }
        if self.action_counts.iter().any(|&n| n < 2) {
            return Err(Error::invalid(format!(
                "every player needs at least 2 actions, got {:?}",
                self.action_counts
            )));
        }
        Ok(())
    }
}

/// Game with i.i.d. `uniform(-1, 1)` payoffs, rescaled into `[-5, 5]`.
/// Deterministic in `seed`.
pub fn sample_random_game(spec: &GameSpec, seed: u64) -> Result<NormalFormGame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = spec.action_counts.len() * spec.action_counts.iter().product::<usize>();
    let mut payoffs: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize_in_place(&mut payoffs);
    NormalFormGame::new(spec.action_counts.clone(), payoffs)
}

/// Rock-paper-scissors with win 1, loss -1, tie 0.
pub fn rock_paper_scissors() -> NormalFormGame {
    let row = vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ];
    let col: Vec<Vec<f64>> = row
        .iter()
        .map(|r| r.iter().map(|x| -x).collect())
        .collect();
    NormalFormGame::bimatrix(&row, &col).expect("static shape")
}

/// Matching pennies: the row player wins 1 on a match, loses 1 otherwise.
pub fn matching_pennies() -> NormalFormGame {
    NormalFormGame::bimatrix(
        &[vec![1.0, -1.0], vec![-1.0, 1.0]],
        &[vec![-1.0, 1.0], vec![1.0, -1.0]],
    )
    .expect("static shape")
}
