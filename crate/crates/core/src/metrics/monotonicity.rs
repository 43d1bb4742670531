use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::structure::random_simplex;
use crate::error::{Error, Result};
use crate::mfg::{
    mixed_payoff, mixture_flow, occupancy_flow, payoff, DeterministicPolicy, Horizon, MeanFieldGame, MixedPolicy,
    PolicySet,
};

/// Pair of policies violating the monotonicity condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness<P> {
    pub first: P,
    pub second: P,
    /// `J(1,mu1) + J(2,mu2) - J(2,mu1) - J(1,mu2)`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport<P> {
    pub monotone: bool,
    /// Largest sampled value of the four-term expression.
    pub worst: f64,
    pub witness: Option<MonotonicityWitness<P>>,
}

fn random_policy<R: Rng + ?Sized>(game: &MeanFieldGame, rng: &mut R) -> DeterministicPolicy {
    let (nx, na) = (game.num_states(), game.num_actions());
    let mut row = || (0..nx).map(|_| rng.random_range(0..na)).collect::<Vec<_>>();
    match game.horizon() {
        Horizon::Finite { steps } => DeterministicPolicy::TimeIndexed((0..steps).map(|_| row()).collect()),
        Horizon::Discounted { .. } => DeterministicPolicy::Stationary(row()),
    }
}

fn record<P: Clone>(report: &mut MonotonicityReport<P>, first: &P, second: &P, value: f64, tol: f64) {
    if value > report.worst {
        report.worst = value;
        if value > tol {
            report.monotone = false;
            report.witness = Some(MonotonicityWitness { first: first.clone(), second: second.clone(), value });
        }
    }
}

/// Samples pairs of pure policies and checks
/// `J(pi1, mu^pi1) + J(pi2, mu^pi2) - J(pi2, mu^pi1) - J(pi1, mu^pi2) <= tol`.
/// A refutation only: `true` means no sampled pair violated it.
pub fn check_monotonicity<R: Rng + ?Sized>(
    game: &MeanFieldGame,
    pairs: usize,
    tol: f64,
    rng: &mut R,
) -> Result<MonotonicityReport<DeterministicPolicy>> {
    if pairs == 0 {
        return Err(Error::Parameter("monotonicity check needs at least one pair".into()));
    }
    let mut report = MonotonicityReport { monotone: true, worst: f64::NEG_INFINITY, witness: None };
    for _ in 0..pairs {
        let (p1, p2) = (random_policy(game, rng), random_policy(game, rng));
        let (m1, m2) = (occupancy_flow(game, &p1)?, occupancy_flow(game, &p2)?);
        let value = payoff(game, &p1, &m1)? + payoff(game, &p2, &m2)? - payoff(game, &p2, &m1)? - payoff(game, &p1, &m2)?;
        record(&mut report, &p1, &p2, value, tol);
    }
    Ok(report)
}

/// The same condition for mixtures over a restricted set.
pub fn check_restricted_monotonicity<R: Rng + ?Sized>(
    game: &MeanFieldGame,
    set: &PolicySet,
    pairs: usize,
    tol: f64,
    rng: &mut R,
) -> Result<MonotonicityReport<MixedPolicy>> {
    if pairs == 0 || set.is_empty() {
        return Err(Error::Parameter("restricted monotonicity needs pairs and policies".into()));
    }
    let n = set.len();
    let mut report = MonotonicityReport { monotone: true, worst: f64::NEG_INFINITY, witness: None };
    for _ in 0..pairs {
        let n1 = MixedPolicy::new(random_simplex(n, rng))?;
        let n2 = MixedPolicy::new(random_simplex(n, rng))?;
        let (m1, m2) = (mixture_flow(set, &n1)?, mixture_flow(set, &n2)?);
        let value = mixed_payoff(game, set, &n1, &m1)? + mixed_payoff(game, set, &n2, &m2)?
            - mixed_payoff(game, set, &n2, &m1)?
            - mixed_payoff(game, set, &n1, &m2)?;
        record(&mut report, &n1, &n2, value, tol);
    }
    Ok(report)
}

/// Random restricted set of up to `size` pure policies with pairwise
/// distinct occupancy flows.
pub fn random_policy_set<R: Rng + ?Sized>(game: &MeanFieldGame, size: usize, rng: &mut R) -> Result<PolicySet> {
    let mut set = PolicySet::new();
    let mut attempts = 0;
    while set.len() < size && attempts < 100 * size.max(1) {
        let p = random_policy(game, rng);
        let flow = occupancy_flow(game, &p)?;
        if !(0..set.len()).any(|i| set.flow(i) == &flow) {
            set.insert(game, p)?;
        }
        attempts += 1;
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(rng);
    set.subset(&order)
}
