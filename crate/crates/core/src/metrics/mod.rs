//! True-game certification: equilibrium gaps, diff-affinity, the meta-game
//! of a restricted set and monotonicity checks.

mod gaps;
mod monotonicity;
mod structure;

pub use gaps::{
    ce_gap, cce_gap, exploitability, gap, policy_exploitability, weighted_ce_gap, GapKind,
    GapReport,
};
pub use monotonicity::{
    check_monotonicity, check_restricted_monotonicity, random_policy_set, MonotonicityReport, MonotonicityWitness,
};
pub use structure::{
    check_diff_affine, meta_game_matrix, random_simplex, symmetric_nash_of_meta_game, symmetric_regret,
    DiffAffineReport, DiffAffineWitness, SymmetricNash, SymmetricNashMethod,
};
