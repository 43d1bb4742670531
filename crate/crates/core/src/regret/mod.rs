//! No-regret learning over a restricted policy set, regret bookkeeping and
//! bandit compression of the resulting correlation devices.

mod device;
mod dynamics;
mod learners;
mod lp;
mod trace;

pub use device::{Atom, CorrelationDevice};
pub use dynamics::{run_regret_loop, run_regret_loop_observed, BaseLearner, PayoffSource, RegretKind, RegretLoopConfig, RegretLoopOutcome};
pub use learners::{
    hedge_step, internal_regret_step, regret_matching_step, stationarity_tol, stationary_distribution,
    BlumMansour, Hedge, Learner, RegretMatching, STATIONARY_MAX_ITERATIONS,
};
pub use lp::{row_value, solve_minimax, MinimaxSolution};
pub use trace::{compress_ce, compress_cce, noisy_compression_gap, NoisyCompressionSample, RegretTrace};
