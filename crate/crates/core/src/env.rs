//! The game-modification decision process.
//!
//! A state pairs the original game with the current modified game. An action
//! is a CP weight vector; the transition adds the weighted reconstruction to
//! the current game, the solver runs on the result, and its solution is
//! scored by NashConv on the original game. The reward is the drop in that
//! NashConv relative to the previous step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decomposition::{apply_modification, cp_decompose, CpConfig, CpFactors};
use crate::error::{Error, Result};
use crate::game::NormalFormGame;
use crate::solvers::{Solver, SolverConfig, SolverKind};

pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_ETA_STEP: f64 = 5.0;
pub const DEFAULT_DISCOUNT: f64 = 0.99;

/// Games whose unmodified NashConv is below this are left out of score
/// aggregates.
pub const MIN_BASELINE_NC: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub eta_step: f64,
    pub cp: CpConfig,
    pub solver: SolverConfig,
    pub discount: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            eta_step: DEFAULT_ETA_STEP,
            cp: CpConfig::default(),
            solver: SolverKind::AlphaRank.default_config(),
            discount: DEFAULT_DISCOUNT,
        }
    }
}

impl EpisodeConfig {
    pub fn rank(&self) -> usize {
        self.cp.rank
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.cp.rank == 0 {
            return Err(Error::invalid("CP rank must be at least 1"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::invalid(format!("discount must lie in (0, 1], got {}", self.discount)));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct EnvState {
    original: Arc<NormalFormGame>,
    current: NormalFormGame,
    factors: Arc<CpFactors>,
    step: usize,
    nc_trace: Vec<f64>,
}

impl EnvState {
    pub fn original(&self) -> &NormalFormGame {
        &self.original
    }

    pub fn original_arc(&self) -> &Arc<NormalFormGame> {
        &self.original
    }

    pub fn current(&self) -> &NormalFormGame {
        &self.current
    }

    pub fn factors(&self) -> &CpFactors {
        &self.factors
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// NashConv on the original game of the solution at every step so far,
    /// starting with the unmodified game.
    pub fn nc_trace(&self) -> &[f64] {
        &self.nc_trace
    }

    pub fn baseline_nc(&self) -> f64 {
        self.nc_trace[0]
    }

    pub fn min_nc(&self) -> f64 {
        self.nc_trace.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            original: &self.original,
            current: &self.current,
        }
    }

    pub fn improvement_score(&self) -> f64 {
        improvement_score(&self.nc_trace, self.baseline_nc())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub original: &'a NormalFormGame,
    pub current: &'a NormalFormGame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub nash_conv: f64,
    pub min_nash_conv: f64,
}

/// Runs episodes for one solver and episode configuration.
#[derive(Debug, Clone)]
pub struct Environment<S = SolverConfig> {
    config: EpisodeConfig,
    solver: S,
}

impl Environment<SolverConfig> {
    pub fn new(config: EpisodeConfig) -> Result<Self> {
        config.validate()?;
        let solver = config.solver.clone();
        Ok(Self { config, solver })
    }
}

impl<S: Solver> Environment<S> {
    /// Uses `solver` in place of the configured one.
    pub fn with_solver(config: EpisodeConfig, solver: S) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, solver })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn decompose(&self, game: &NormalFormGame) -> Result<CpFactors> {
        cp_decompose(game, &self.config.cp)
    }

    /// Decomposes the game, solves it unmodified and records the baseline
    /// NashConv.
    pub fn reset(&self, game: impl Into<Arc<NormalFormGame>>) -> Result<EnvState> {
        let game = game.into();
        let factors = Arc::new(self.decompose(&game)?);
        self.reset_with_factors(game, factors)
    }

    /// Like [`reset`](Self::reset) with a decomposition computed earlier.
    pub fn reset_with_factors(&self, game: Arc<NormalFormGame>, factors: Arc<CpFactors>) -> Result<EnvState> {
        if factors.shape() != game.shape().as_slice() {
            return Err(Error::shape("decomposition does not match the game"));
        }
        if factors.rank() != self.config.rank() {
            return Err(Error::shape(format!(
                "decomposition has rank {}, episode expects {}",
                factors.rank(),
                self.config.rank()
            )));
        }
        let solution = self.solver.solve(&game)?;
        let baseline = game.nash_conv(&solution.profile)?;
        Ok(EnvState {
            current: (*game).clone(),
            original: game,
            factors,
            step: 0,
            nc_trace: vec![baseline],
        })
    }

    pub fn step(&self, state: &mut EnvState, action: &[f64]) -> Result<StepResult> {
        if state.step >= self.config.horizon {
            return Err(Error::EpisodeDone(state.step));
        }
        if action.len() != state.factors.rank() {
            return Err(Error::shape(format!(
                "action has {} weights, decomposition rank is {}",
                action.len(),
                state.factors.rank()
            )));
        }
        if let Some(bad) = action.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("action weight {bad}")));
        }
        let weights: Vec<f64> = action.iter().map(|w| w.clamp(-1.0, 1.0)).collect();
        let next = apply_modification(&state.current, &state.factors, &weights, self.config.eta_step)?;
        let solution = self.solver.solve(&next)?;
        let nc = state.original.nash_conv(&solution.profile)?;
        let previous = *state.nc_trace.last().expect("trace starts with the baseline");
        state.current = next;
        state.step += 1;
        state.nc_trace.push(nc);
        Ok(StepResult {
            reward: previous - nc,
            done: state.step == self.config.horizon,
            nash_conv: nc,
            min_nash_conv: state.min_nc(),
        })
    }
}

/// `1 - min_t NC_t / NC_0` with the minimum taken over the whole trace,
/// including the unmodified game, so the score lies in `[0, 1]`. Games with
/// a (near-)zero baseline score 0.
pub fn improvement_score(nc_trace: &[f64], baseline_nc: f64) -> f64 {
    if !is_scorable(baseline_nc) {
        return 0.0;
    }
    let best = nc_trace
        .iter()
        .copied()
        .fold(baseline_nc, f64::min)
        .max(0.0);
    (1.0 - best / baseline_nc).clamp(0.0, 1.0)
}

pub fn is_scorable(baseline_nc: f64) -> bool {
    baseline_nc >= MIN_BASELINE_NC
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::game::{rock_paper_scissors, sample_random_game, GameSpec, MixedProfile};
    use crate::solvers::Solution;

    fn config(solver: SolverKind, horizon: usize) -> EpisodeConfig {
        EpisodeConfig {
            horizon,
            solver: solver.default_config(),
            ..EpisodeConfig::default()
        }
    }

    #[test]
    fn reset_contract() {
        let env = Environment::new(config(SolverKind::FictitiousPlay, 5)).unwrap();
        let state = env.reset(rock_paper_scissors()).unwrap();
        assert!(state.baseline_nc() <= 0.05);
        assert_eq!(state.nc_trace(), &[state.baseline_nc()]);
        assert_eq!(state.step_index(), 0);

        let state = env.reset(NormalFormGame::constant(vec![2, 3], 1.0).unwrap()).unwrap();
        assert!(state.baseline_nc() < 1e-12);
    }

    #[test]
    fn zero_action_is_a_no_op() {
        let env = Environment::new(config(SolverKind::AlphaRank, 4)).unwrap();
        let game = sample_random_game(&GameSpec::new(vec![4, 4]), 9).unwrap();
        let mut state = env.reset(game).unwrap();
        for _ in 0..4 {
            let r = env.step(&mut state, &[0.0; 10]).unwrap();
            assert!(r.reward.abs() < 1e-12);
        }
        let first = state.nc_trace()[0];
        assert!(state.nc_trace().iter().all(|&nc| (nc - first).abs() < 1e-12));
    }

    #[test]
    fn done_after_horizon() {
        let env = Environment::new(config(SolverKind::FictitiousPlay, 2)).unwrap();
        let game = sample_random_game(&GameSpec::new(vec![3, 3]), 2).unwrap();
        let mut state = env.reset(game).unwrap();
        assert!(!env.step(&mut state, &[0.5; 10]).unwrap().done);
        assert!(env.step(&mut state, &[-0.5; 10]).unwrap().done);
        assert!(matches!(env.step(&mut state, &[0.0; 10]), Err(Error::EpisodeDone(2))));
        assert!(env.step(&mut env.reset(rock_paper_scissors()).unwrap(), &[0.0; 3]).is_err());
    }

    #[test]
    fn rewards_telescope() {
        let env = Environment::new(config(SolverKind::CeRegretMatching, 6)).unwrap();
        let game = sample_random_game(&GameSpec::new(vec![3, 2]), 4).unwrap();
        let mut state = env.reset(game).unwrap();
        let mut total = 0.0;
        for i in 0..6 {
            let action: Vec<f64> = (0..10).map(|j| ((i * 10 + j) as f64 * 0.37).sin() * 1.5).collect();
            total += env.step(&mut state, &action).unwrap().reward;
        }
        let trace = state.nc_trace();
        assert!((total - (trace[0] - trace[6])).abs() < 1e-12);
    }

    /// Returns a fixed profile and records the games it was asked to solve.
    struct Recording {
        seen: Mutex<Vec<NormalFormGame>>,
    }

    impl Solver for Recording {
        fn solve(&self, game: &NormalFormGame) -> Result<Solution> {
            self.seen.lock().unwrap().push(game.clone());
            let mut actions = vec![0; game.num_players()];
            actions[0] = self.seen.lock().unwrap().len() % game.action_counts()[0];
            Ok(Solution {
                profile: MixedProfile::pure(game.action_counts(), &actions),
                joint: None,
                iterations: 1,
            })
        }
    }

    #[test]
    fn trace_scores_solutions_on_the_original_game() {
        let original = sample_random_game(&GameSpec::new(vec![3, 3]), 21).unwrap();
        let solver = Recording { seen: Mutex::new(Vec::new()) };
        let env = Environment::with_solver(config(SolverKind::AlphaRank, 3), solver).unwrap();
        let mut state = env.reset(original.clone()).unwrap();
        for _ in 0..3 {
            env.step(&mut state, &[1.0; 10]).unwrap();
        }
        let seen = env.solver.seen.lock().unwrap();
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[0], original);
        for (t, game) in seen.iter().enumerate() {
            let mut actions = vec![0; 2];
            actions[0] = (t + 1) % 3;
            let profile = MixedProfile::pure(&[3, 3], &actions);
            assert_eq!(state.nc_trace()[t], original.nash_conv(&profile).unwrap());
            if t > 0 {
                assert_ne!(game, &original);
            }
        }
    }

    #[test]
    fn scores() {
        assert_eq!(improvement_score(&[1.0, 0.5, 0.8], 1.0), 0.5);
        assert_eq!(improvement_score(&[1.0, 1.2, 1.5], 1.0), 0.0);
        assert_eq!(improvement_score(&[0.7, 0.0], 0.7), 1.0);
        assert_eq!(improvement_score(&[1e-9, 0.0], 1e-9), 0.0);
        assert!(!is_scorable(5e-7));
    }
}
