//! Mean-field policy-space response oracles.
//!
//! Finite mean-field games with deterministic dynamics, exact best
//! responses, no-regret restricted-game solvers with bandit compression,
//! and the PSRO outer loops for Nash, correlated and coarse-correlated
//! equilibria.

pub mod baselines;
pub mod best_response;
pub mod error;
pub mod games;
pub mod metrics;
pub mod mfg;
pub mod nash;
pub mod psro;
pub mod regret;
pub mod scalar;

pub use error::{Error, Result};
pub use mfg::{
    DeterministicPolicy, Horizon, MeanFieldGame, MixedPolicy, PolicySet, PopulationFlow, StochasticPolicy,
};
pub use regret::{CorrelationDevice, RegretTrace};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Minimax solution at the precision used by the game layer.
pub type MinimaxSolution = regret::MinimaxSolution<f64>;
/// Single-precision minimax solution.
pub type MinimaxSolution32 = regret::MinimaxSolution<f32>;
