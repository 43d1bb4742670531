use serde::{Deserialize, Serialize};

use crate::best_response::{best_response, best_response_to_table, br_ce, br_cce};
use crate::error::{Error, Result};
use crate::mfg::{
    mixed_payoff, mixture_flow, payoffs_against, stochastic_flow, DeterministicPolicy, MeanFieldGame,
    MixedPolicy, PolicySet, RewardTable, StochasticPolicy,
};
use crate::regret::CorrelationDevice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    Nash,
    Cce,
    Ce,
}

/// A true-game equilibrium gap together with the deviation attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub kind: GapKind,
    pub value: f64,
    pub witness: DeterministicPolicy,
    /// Set index of the recommendation deviated from (correlated gaps only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<usize>,
}

/// `max_pi J(pi, mu(nu)) - J(pi(nu), mu(nu))` over all pure policies.
pub fn exploitability(game: &MeanFieldGame, set: &PolicySet, nu: &MixedPolicy) -> Result<GapReport> {
    let mu = mixture_flow(set, nu)?;
    let br = best_response(game, &mu)?;
    Ok(GapReport {
        kind: GapKind::Nash,
        value: br.value - mixed_payoff(game, set, nu, &mu)?,
        witness: br.policy,
        recommendation: None,
    })
}

/// Exploitability of a behavioural policy played by the whole population.
pub fn policy_exploitability(game: &MeanFieldGame, policy: &StochasticPolicy) -> Result<GapReport> {
    let mu = stochastic_flow(game, policy);
    let table = RewardTable::new(game, &mu)?;
    let br = best_response_to_table(game, &table)?;
    Ok(GapReport {
        kind: GapKind::Nash,
        value: br.value - table.evaluate(&mu),
        witness: br.policy,
        recommendation: None,
    })
}

/// Per-atom payoff vectors `J(pi_i, mu(nu_t))`.
fn atom_payoffs(game: &MeanFieldGame, set: &PolicySet, rho: &CorrelationDevice) -> Result<Vec<Vec<f64>>> {
    rho.atoms()
        .iter()
        .map(|a| payoffs_against(game, set, &mixture_flow(set, &a.nu)?))
        .collect()
}

/// `max_pi sum_t rho_t (J(pi, mu(nu_t)) - J(pi(nu_t), mu(nu_t)))`.
pub fn cce_gap(game: &MeanFieldGame, set: &PolicySet, rho: &CorrelationDevice) -> Result<GapReport> {
    let br = br_cce(game, set, rho)?;
    let payoffs = atom_payoffs(game, set, rho)?;
    let on_device: f64 = rho
        .atoms()
        .iter()
        .zip(&payoffs)
        .map(|(a, j)| a.weight * a.nu.weights().iter().zip(j).map(|(w, v)| w * v).sum::<f64>())
        .sum();
    Ok(GapReport {
        kind: GapKind::Cce,
        value: br.value - on_device,
        witness: br.policy,
        recommendation: None,
    })
}

/// Conditional gain of the best deviation from each recommendation with
/// positive marginal: `(i, rho(pi_i), gain_i, witness_i)`.
fn ce_gains(
    game: &MeanFieldGame,
    set: &PolicySet,
    rho: &CorrelationDevice,
) -> Result<Vec<(usize, f64, f64, DeterministicPolicy)>> {
    let payoffs = atom_payoffs(game, set, rho)?;
    let mut out = Vec::new();
    for i in 0..rho.width().min(set.len()) {
        let marginal = rho.marginal(i);
        if marginal <= 0.0 {
            continue;
        }
        let cond = rho.conditional_weights(i)?;
        let obeying: f64 = cond.iter().zip(&payoffs).map(|(w, j)| w * j[i]).sum();
        let br = br_ce(game, set, rho, i)?;
        out.push((i, marginal, br.value - obeying, br.policy));
    }
    if out.is_empty() {
        return Err(Error::Parameter("device recommends no policy with positive probability".into()));
    }
    Ok(out)
}

fn max_gain(gains: Vec<(usize, f64, f64, DeterministicPolicy)>, weighted: bool) -> GapReport {
    let score = |g: &(usize, f64, f64, DeterministicPolicy)| if weighted { g.1 * g.2 } else { g.2 };
    let best = gains
        .into_iter()
        .reduce(|best, g| if score(&g) > score(&best) { g } else { best })
        .expect("non-empty");
    GapReport {
        kind: GapKind::Ce,
        value: score(&best),
        recommendation: Some(best.0),
        witness: best.3,
    }
}

/// `max_{pi'} max_{pi: rho(pi) > 0} sum_nu rho(nu | pi) (J(pi', mu(nu)) - J(pi, mu(nu)))`:
/// the best gain of an agent that deviates after seeing its recommendation.
pub fn ce_gap(game: &MeanFieldGame, set: &PolicySet, rho: &CorrelationDevice) -> Result<GapReport> {
    Ok(max_gain(ce_gains(game, set, rho)?, false))
}

/// As [`ce_gap`] with each recommendation's gain weighted by its marginal
/// `rho(pi)`: the epsilon of an approximate correlated equilibrium, and the
/// quantity bounded by swap-regret compression.
pub fn weighted_ce_gap(game: &MeanFieldGame, set: &PolicySet, rho: &CorrelationDevice) -> Result<GapReport> {
    Ok(max_gain(ce_gains(game, set, rho)?, true))
}

/// Gap of the requested kind; a Nash gap requires a single-atom device.
pub fn gap(kind: GapKind, game: &MeanFieldGame, set: &PolicySet, rho: &CorrelationDevice) -> Result<GapReport> {
    match kind {
        GapKind::Nash => match rho.atoms() {
            [atom] => exploitability(game, set, &atom.nu),
            _ => Err(Error::Parameter("exploitability needs a single-atom device".into())),
        },
        GapKind::Cce => cce_gap(game, set, rho),
        GapKind::Ce => ce_gap(game, set, rho),
    }
}
