//! Exact best responses by dynamic programming: against a population flow,
//! against a correlation device (coarse deviation) and against the device
//! conditioned on a recommendation.
//!
//! Device-averaged objectives reduce to one DP over the averaged reward
//! `sum_t w_t r(x, a, mu_t)`, since `J` is linear in the deviator's own
//! occupancy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{
    mixture_flow, occupancy_flow, DeterministicPolicy, Horizon, MeanFieldGame, PolicySet,
    PopulationFlow, RewardTable,
};
use crate::regret::CorrelationDevice;

/// Relative slack under which two action values count as tied; ties go to
/// the lowest action index.
pub const TIE_TOL: f64 = 1e-12;
/// Value iteration stops once the span of the update falls below this.
pub const VI_SPAN_TOL: f64 = 1e-10;
pub const VI_MAX_SWEEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponseResult {
    pub policy: DeterministicPolicy,
    /// Payoff of `policy` against the target.
    pub value: f64,
    /// `values[step][state]` of the optimal policy (one row when discounted).
    pub per_state_values: Option<Vec<Vec<f64>>>,
}

fn argmax_lowest(q: &[f64]) -> usize {
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOL * best.abs().max(1.0);
    q.iter().position(|v| *v >= best - slack).unwrap_or(0)
}

/// Best response to the (already step-weighted) reward table.
pub fn best_response_to_table(game: &MeanFieldGame, table: &RewardTable) -> Result<BestResponseResult> {
    let (nx, na) = (game.num_states(), game.num_actions());
    let mut q = vec![0.0; na];
    let (policy, values) = match game.horizon() {
        Horizon::Finite { steps } => {
            let mut actions = vec![vec![0usize; nx]; steps];
            let mut values = vec![vec![0.0; nx]; steps];
            let mut next = vec![0.0; nx];
            for s in (0..steps).rev() {
                for x in 0..nx {
                    for (a, qa) in q.iter_mut().enumerate() {
                        *qa = table.get(s, x, a) + next[game.transition(x, a)];
                    }
                    let a = argmax_lowest(&q);
                    actions[s][x] = a;
                    values[s][x] = q[a];
                }
                next.clone_from(&values[s]);
            }
            (DeterministicPolicy::TimeIndexed(actions), values)
        }
        Horizon::Discounted { gamma, .. } => {
            // Stationary reward: every row of the table is row 0 times gamma^s.
            let mut v = vec![0.0; nx];
            let mut fresh = vec![0.0; nx];
            let mut converged = false;
            for _ in 0..VI_MAX_SWEEPS {
                for x in 0..nx {
                    fresh[x] = (0..na)
                        .map(|a| table.get(0, x, a) + gamma * v[game.transition(x, a)])
                        .fold(f64::NEG_INFINITY, f64::max);
                }
                let (lo, hi) = fresh
                    .iter()
                    .zip(&v)
                    .map(|(n, o)| n - o)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
                std::mem::swap(&mut v, &mut fresh);
                if hi - lo < VI_SPAN_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numeric(format!(
                    "value iteration did not reach span {VI_SPAN_TOL} in {VI_MAX_SWEEPS} sweeps"
                )));
            }
            let mut actions = vec![0usize; nx];
            for (x, slot) in actions.iter_mut().enumerate() {
                for (a, qa) in q.iter_mut().enumerate() {
                    *qa = table.get(0, x, a) + gamma * v[game.transition(x, a)];
                }
                *slot = argmax_lowest(&q);
            }
            (DeterministicPolicy::Stationary(actions), vec![v])
        }
    };
    let own = occupancy_flow(game, &policy)?;
    Ok(BestResponseResult {
        value: table.evaluate(&own),
        policy,
        per_state_values: Some(values),
    })
}

/// Payoff-maximising pure policy against the population flow `mu`.
pub fn best_response(game: &MeanFieldGame, mu: &PopulationFlow) -> Result<BestResponseResult> {
    best_response_to_table(game, &RewardTable::new(game, mu)?)
}

fn averaged_table(
    game: &MeanFieldGame,
    set: &PolicySet,
    rho: &CorrelationDevice,
    weights: &[f64],
) -> Result<RewardTable> {
    let mut tables = Vec::new();
    for (atom, &w) in rho.atoms().iter().zip(weights) {
        if w > 0.0 {
            let flow = mixture_flow(set, &atom.nu)?;
            tables.push((w, RewardTable::new(game, &flow)?));
        }
    }
    RewardTable::combine(tables.iter().map(|(w, t)| (*w, t)))
}

/// Best unilateral deviation before the recommendation is revealed:
/// maximises `sum_t rho_t J(pi, mu(nu_t))`.
pub fn br_cce(game: &MeanFieldGame, set: &PolicySet, rho: &CorrelationDevice) -> Result<BestResponseResult> {
    if rho.is_empty() {
        return Err(Error::Parameter("empty correlation device".into()));
    }
    rho.check(set)?;
    let weights: Vec<f64> = rho.atoms().iter().map(|a| a.weight).collect();
    best_response_to_table(game, &averaged_table(game, set, rho, &weights)?)
}

/// Best deviation for an agent told to play set entry `recommended`:
/// maximises `sum_t rho(nu_t | pi_k) J(pi, mu(nu_t))`.
pub fn br_ce(
    game: &MeanFieldGame,
    set: &PolicySet,
    rho: &CorrelationDevice,
    recommended: usize,
) -> Result<BestResponseResult> {
    rho.check(set)?;
    if recommended >= set.len() {
        return Err(Error::Lookup(format!("recommendation {recommended} not in the policy set")));
    }
    let weights = rho.conditional_weights(recommended)?;
    best_response_to_table(game, &averaged_table(game, set, rho, &weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{self, A, B, C};
    use crate::mfg::{payoff, MixedPolicy};
    use crate::regret::Atom;

    fn rps_set() -> (MeanFieldGame, PolicySet) {
        let g = games::biased_rps();
        let set = PolicySet::from_policies(&g, (0..3).map(|a| DeterministicPolicy::constant(&g, a))).unwrap();
        (g, set)
    }

    fn nash() -> MixedPolicy {
        MixedPolicy::new(vec![15.0 / 71.0, 21.0 / 71.0, 35.0 / 71.0]).unwrap()
    }

    #[test]
    fn rps_against_all_a() {
        let (g, set) = rps_set();
        let br = best_response(&g, set.flow(A)).unwrap();
        assert_eq!(br.policy, DeterministicPolicy::constant(&g, C));
        assert!((br.value - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rps_against_nash_ties_to_lowest() {
        let (g, set) = rps_set();
        let mu = mixture_flow(&set, &nash()).unwrap();
        let br = best_response(&g, &mu).unwrap();
        assert!(br.value.abs() < 1e-10);
        assert_eq!(br.policy, DeterministicPolicy::constant(&g, A));
    }

    #[test]
    fn zero_game_picks_lowest_actions() {
        let g = games::zero_reward(3, 2, 3).unwrap();
        let mu = occupancy_flow(&g, &DeterministicPolicy::constant(&g, 1)).unwrap();
        let br = best_response(&g, &mu).unwrap();
        assert_eq!(br.value, 0.0);
        assert_eq!(br.policy, DeterministicPolicy::lowest(&g));
    }

    #[test]
    fn cce_on_two_pure_atoms() {
        let (g, set) = rps_set();
        let rho = CorrelationDevice::new(vec![
            Atom { weight: 0.5, nu: MixedPolicy::pure(3, A) },
            Atom { weight: 0.5, nu: MixedPolicy::pure(3, B) },
        ])
        .unwrap();
        let br = br_cce(&g, &set, &rho).unwrap();
        assert_eq!(br.policy, DeterministicPolicy::constant(&g, A));
        assert!((br.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singleton_device_matches_plain_best_response() {
        let (g, set) = rps_set();
        let nu = MixedPolicy::new(vec![0.2, 0.5, 0.3]).unwrap();
        let rho = CorrelationDevice::singleton(nu.clone());
        let plain = best_response(&g, &mixture_flow(&set, &nu).unwrap()).unwrap();
        assert_eq!(br_cce(&g, &set, &rho).unwrap(), plain);
        assert_eq!(br_ce(&g, &set, &rho, 1).unwrap(), plain);
    }

    #[test]
    fn ce_conditions_on_recommendation() {
        let (g, set) = rps_set();
        let rho = CorrelationDevice::new(vec![
            Atom { weight: 0.5, nu: MixedPolicy::pure(3, A) },
            Atom { weight: 0.5, nu: MixedPolicy::pure(3, B) },
        ])
        .unwrap();
        let br = br_ce(&g, &set, &rho, A).unwrap();
        assert_eq!(br.policy, DeterministicPolicy::constant(&g, C));
        assert!((br.value - 0.7).abs() < 1e-15);
        assert_eq!(br_ce(&g, &set, &rho, C).unwrap_err(), Error::UndefinedConditional(C));
    }

    #[test]
    fn empty_device_is_rejected() {
        let (g, set) = rps_set();
        let empty = CorrelationDevice::new(vec![]);
        assert!(empty.is_err());
        // a device can never be empty once built, so exercise the guard on a
        // device that refers past the end of the set instead
        let wide = CorrelationDevice::singleton(MixedPolicy::pure(5, 4));
        assert!(matches!(br_cce(&g, &set, &wide), Err(Error::Lookup(_))));
    }

    #[test]
    fn value_matches_recomputed_payoff_on_chain() {
        let g = games::crowd_chain(4, 5, 1.0).unwrap();
        let mu = occupancy_flow(&g, &DeterministicPolicy::constant(&g, games::RIGHT)).unwrap();
        let br = best_response(&g, &mu).unwrap();
        assert!((br.value - payoff(&g, &br.policy, &mu).unwrap()).abs() < 1e-10);
        let v0: f64 = g
            .mu0()
            .iter()
            .zip(&br.per_state_values.as_ref().unwrap()[0])
            .map(|(m, v)| m * v)
            .sum();
        assert!((br.value - v0).abs() < 1e-10);
    }

    #[test]
    fn discounted_best_response_beats_constant_policies() {
        let g = games::crowd_chain_with(4, Horizon::discounted(0.8).unwrap(), 1.0, 0.1).unwrap();
        let mu = occupancy_flow(&g, &DeterministicPolicy::constant(&g, games::STAY)).unwrap();
        let br = best_response(&g, &mu).unwrap();
        assert!((br.value - payoff(&g, &br.policy, &mu).unwrap()).abs() < 1e-10);
        for a in 0..3 {
            let p = payoff(&g, &DeterministicPolicy::constant(&g, a), &mu).unwrap();
            assert!(br.value >= p - 1e-7);
        }
    }
}
