//! Game model: games, pure and mixed policies, population flows and the
//! expected-payoff functional.

mod flow;
mod game;
mod payoff;
mod policy;

pub use flow::{mixture_flow, occupancy_flow, stochastic_flow, PopulationFlow};
pub use game::{GameBuilder, Horizon, MeanFieldGame, Population, RewardFn, PROB_TOL};
pub use payoff::{mixed_payoff, noisy_payoff, payoff, payoffs_against, NoiseModel, RewardTable};
pub use policy::{DeterministicPolicy, MixedPolicy, PolicySet, StochasticPolicy};
