//! Learning payoff modifications that help approximate equilibrium solvers.
//!
//! A policy network proposes weights over the CP decomposition of a
//! normal-form game; the weighted reconstruction is added to the game before
//! an inexact solver (alpha-rank, regret matching, fictitious play or
//! projected replicator dynamics) runs, and the solution is judged by its
//! NashConv on the unmodified game. The policy is trained with PPO.

pub mod decomposition;
pub mod env;
pub mod error;
pub mod game;
pub mod harness;
pub mod nn;
pub mod ppo;
pub mod response_graph;
pub mod solvers;
pub mod sweep;

pub use error::{Error, Result};
