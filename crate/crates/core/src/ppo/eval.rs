use super::envs::PreparedGame;
use crate::env::{is_scorable, EnvState, Environment};
use crate::error::{Error, Result};
use crate::nn::ActorCritic;
use crate::solvers::Solver;

/// Per-game improvement scores of one policy over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    /// `None` for games whose unmodified NashConv is too small to score.
    pub scores: Vec<Option<f64>>,
    pub mean: f64,
    pub excluded: usize,
}

impl ScoreSummary {
    pub fn from_scores(scores: Vec<Option<f64>>) -> Self {
        let kept: Vec<f64> = scores.iter().flatten().copied().collect();
        let mean = if kept.is_empty() {
            0.0
        } else {
            kept.iter().sum::<f64>() / kept.len() as f64
        };
        Self {
            excluded: scores.len() - kept.len(),
            scores,
            mean,
        }
    }
}

/// Plays one full episode per game, choosing actions with `policy`, and
/// scores each episode.
pub fn evaluate_policy<S, P>(env: &Environment<S>, games: &[PreparedGame], mut policy: P) -> Result<ScoreSummary>
where
    S: Solver,
    P: FnMut(&PreparedGame, &EnvState) -> Result<Vec<f64>>,
{
    let mut scores = Vec::with_capacity(games.len());
    for (index, game) in games.iter().enumerate() {
        let wrap = |e| Error::Env {
            index,
            source: Box::new(e),
        };
        let mut state = game.reset(env).map_err(wrap)?;
        loop {
            let action = policy(game, &state).map_err(wrap)?;
            if env.step(&mut state, &action).map_err(wrap)?.done {
                break;
            }
        }
        scores.push(is_scorable(state.baseline_nc()).then(|| state.improvement_score()));
    }
    Ok(ScoreSummary::from_scores(scores))
}

/// Scores the deterministic policy that always plays the Gaussian mean.
pub fn greedy_scores<S: Solver>(model: &ActorCritic, env: &Environment<S>, games: &[PreparedGame]) -> Result<ScoreSummary> {
    evaluate_policy(env, games, |game, state| {
        let input = game.input(state, model.config())?;
        Ok(model.evaluate(&input)?.0.mean)
    })
}
