//! Inexact equilibrium solvers behind one dispatch interface.

mod fictitious_play;
mod projection;
mod regret_matching;
mod replicator;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{JointDistribution, MixedProfile, NormalFormGame};
use crate::response_graph::{self, DEFAULT_ALPHA, DEFAULT_POPULATION};

pub use fictitious_play::solve_fictitious_play;
pub use projection::{exploration_lower_bound, project_to_exploration_simplex};
pub use regret_matching::solve_regret_matching;
pub use replicator::solve_prd;

pub const DEFAULT_FP_ITERATIONS: usize = 1000;
pub const DEFAULT_RM_ITERATIONS: usize = 1000;
pub const DEFAULT_PRD_ITERATIONS: usize = 10_000;
pub const DEFAULT_PRD_DT: f64 = 1e-2;
pub const DEFAULT_PRD_GAMMA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    AlphaRank,
    #[serde(rename = "ce")]
    CeRegretMatching,
    #[serde(rename = "fp")]
    FictitiousPlay,
    Prd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::AlphaRank,
        SolverKind::CeRegretMatching,
        SolverKind::FictitiousPlay,
        SolverKind::Prd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::AlphaRank => "alpha_rank",
            SolverKind::CeRegretMatching => "ce",
            SolverKind::FictitiousPlay => "fp",
            SolverKind::Prd => "prd",
        }
    }

    pub fn default_config(self) -> SolverConfig {
        match self {
            SolverKind::AlphaRank => SolverConfig::AlphaRank {
                alpha: DEFAULT_ALPHA,
                population: DEFAULT_POPULATION,
            },
            SolverKind::CeRegretMatching => SolverConfig::RegretMatching {
                iterations: DEFAULT_RM_ITERATIONS,
            },
            SolverKind::FictitiousPlay => SolverConfig::FictitiousPlay {
                iterations: DEFAULT_FP_ITERATIONS,
            },
            SolverKind::Prd => SolverConfig::Prd {
                iterations: DEFAULT_PRD_ITERATIONS,
                dt: DEFAULT_PRD_DT,
                gamma: DEFAULT_PRD_GAMMA,
            },
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha_rank" | "alpha-rank" | "alpharank" => Ok(SolverKind::AlphaRank),
            "ce" | "regret_matching" => Ok(SolverKind::CeRegretMatching),
            "fp" | "fictitious_play" => Ok(SolverKind::FictitiousPlay),
            "prd" => Ok(SolverKind::Prd),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverConfig {
    AlphaRank { alpha: f64, population: f64 },
    #[serde(rename = "ce")]
    RegretMatching { iterations: usize },
    #[serde(rename = "fp")]
    FictitiousPlay { iterations: usize },
    Prd { iterations: usize, dt: f64, gamma: f64 },
}

impl SolverConfig {
    pub fn kind(&self) -> SolverKind {
        match self {
            SolverConfig::AlphaRank { .. } => SolverKind::AlphaRank,
            SolverConfig::RegretMatching { .. } => SolverKind::CeRegretMatching,
            SolverConfig::FictitiousPlay { .. } => SolverKind::FictitiousPlay,
            SolverConfig::Prd { .. } => SolverKind::Prd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolverConfig::AlphaRank { alpha, population } => {
                if !(alpha > 0.0) || !(population > 1.0) {
                    return Err(Error::invalid(format!(
                        "alpha-rank needs alpha > 0 and m > 1, got alpha={alpha}, m={population}"
                    )));
                }
            }
            SolverConfig::RegretMatching { iterations } | SolverConfig::FictitiousPlay { iterations } => {
                if iterations == 0 {
                    return Err(Error::invalid("solver iterations must be at least 1"));
                }
            }
            SolverConfig::Prd { iterations, dt, gamma } => {
                if iterations == 0 || !(dt > 0.0) || !(0.0..1.0).contains(&gamma) {
                    return Err(Error::invalid(format!(
                        "PRD needs iterations >= 1, dt > 0, 0 <= gamma < 1; got {iterations}, {dt}, {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Output of a solver: a factorized profile (the thing NashConv scores), the
/// joint distribution when the solver produces one, and the iteration count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub profile: MixedProfile,
    pub joint: Option<JointDistribution>,
    pub iterations: usize,
}

pub fn solve(game: &NormalFormGame, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    match *config {
        SolverConfig::AlphaRank { alpha, population } => {
            let (profile, joint) = response_graph::alpha_rank(game, alpha, population)?;
            Ok(Solution {
                profile,
                joint: Some(joint),
                iterations: 1,
            })
        }
        SolverConfig::RegretMatching { iterations } => solve_regret_matching(game, iterations),
        SolverConfig::FictitiousPlay { iterations } => solve_fictitious_play(game, iterations),
        SolverConfig::Prd { iterations, dt, gamma } => solve_prd(game, iterations, dt, gamma),
    }
}

/// Something that maps a game to a solution. The environment is generic
/// over this so tests can substitute instrumented solvers.
pub trait Solver {
    fn solve(&self, game: &NormalFormGame) -> Result<Solution>;
}

impl Solver for SolverConfig {
    fn solve(&self, game: &NormalFormGame) -> Result<Solution> {
        solve(game, self)
    }
}
