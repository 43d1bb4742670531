use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::flow::{occupancy_flow, PopulationFlow};
use super::game::MeanFieldGame;
use super::policy::{DeterministicPolicy, MixedPolicy, PolicySet};
use crate::error::{Error, Result};

/// Rewards `r(x, a, mu_s)` against a fixed environment flow, tabulated once
/// and indexed `[step][state * num_actions + action]`. Each row is already
/// multiplied by its step weight.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardTable {
    rows: Vec<Vec<f64>>,
    num_actions: usize,
}

impl RewardTable {
    pub fn new(game: &MeanFieldGame, env: &PopulationFlow) -> Result<Self> {
        env.compatible(game)?;
        let (nx, na) = (game.num_states(), game.num_actions());
        let weights = game.horizon().step_weights();
        let discounted = game.horizon().is_discounted();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(weights.len());
        for (s, w) in weights.iter().enumerate() {
            // A discounted environment presents the same aggregate at every step.
            if discounted && s > 0 {
                let scale = w / weights[0];
                let row = rows[0].iter().map(|v| v * scale).collect();
                rows.push(row);
                continue;
            }
            let pop = env.population(s);
            let mut row = vec![0.0; nx * na];
            for x in 0..nx {
                for a in 0..na {
                    row[x * na + a] = w * game.reward(x, a, &pop);
                }
            }
            rows.push(row);
        }
        Ok(RewardTable { rows, num_actions: na })
    }

    /// `sum_k weight_k * table_k`, the table of a device-averaged environment.
    pub fn combine<'a>(parts: impl IntoIterator<Item = (f64, &'a RewardTable)>) -> Result<Self> {
        let mut out: Option<RewardTable> = None;
        for (w, t) in parts {
            let acc = out.get_or_insert_with(|| RewardTable {
                rows: t.rows.iter().map(|r| vec![0.0; r.len()]).collect(),
                num_actions: t.num_actions,
            });
            for (d, s) in acc.rows.iter_mut().zip(&t.rows) {
                d.iter_mut().zip(s).for_each(|(d, s)| *d += w * s);
            }
        }
        out.ok_or_else(|| Error::Parameter("empty reward combination".into()))
    }

    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Weighted reward at `(step, state, action)`.
    pub fn get(&self, step: usize, state: usize, action: usize) -> f64 {
        self.rows[step][state * self.num_actions + action]
    }

    /// Expected payoff of a player whose own occupancy is `own`.
    pub fn evaluate(&self, own: &PopulationFlow) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(s, row)| {
                own.state_actions(s)
                    .iter()
                    .zip(row)
                    .filter(|(m, _)| **m != 0.0)
                    .map(|(m, r)| m * r)
                    .sum::<f64>()
            })
            .sum()
    }
}

/// `J(policy, mu)`: payoff of a representative player following `policy`
/// while the population moves along `mu`.
pub fn payoff(game: &MeanFieldGame, policy: &DeterministicPolicy, mu: &PopulationFlow) -> Result<f64> {
    let own = occupancy_flow(game, policy)?;
    Ok(RewardTable::new(game, mu)?.evaluate(&own))
}

/// `J(pi_i, mu)` for every policy of the set.
pub fn payoffs_against(game: &MeanFieldGame, set: &PolicySet, mu: &PopulationFlow) -> Result<Vec<f64>> {
    let table = RewardTable::new(game, mu)?;
    Ok((0..set.len()).map(|i| table.evaluate(set.flow(i))).collect())
}

/// `J(pi(nu), mu) = sum_i nu_i J(pi_i, mu)`.
pub fn mixed_payoff(
    game: &MeanFieldGame,
    set: &PolicySet,
    nu: &MixedPolicy,
    mu: &PopulationFlow,
) -> Result<f64> {
    set.check_mixture(nu)?;
    let table = RewardTable::new(game, mu)?;
    Ok(nu
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, w)| w * table.evaluate(set.flow(i)))
        .sum())
}

/// Additive i.i.d. observation noise on payoffs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::Uniform { half_width } => half_width,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::Parameter(format!("noise scale {v} must be finite and >= 0")))
        }
    }

    /// Mean of `samples` independent draws.
    pub fn sample_mean<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<f64> {
        if samples == 0 {
            return Err(Error::Parameter("noisy payoff needs at least one sample".into()));
        }
        self.validate()?;
        let sum: f64 = match *self {
            NoiseModel::Gaussian { sigma } if sigma > 0.0 => {
                let d = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
                (0..samples).map(|_| d.sample(rng)).sum()
            }
            NoiseModel::Uniform { half_width } if half_width > 0.0 => {
                let d = Uniform::new_inclusive(-half_width, half_width)
                    .map_err(|e| Error::Parameter(e.to_string()))?;
                (0..samples).map(|_| d.sample(rng)).sum()
            }
            _ => 0.0,
        };
        Ok(sum / samples as f64)
    }

    /// Variance of a single draw.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::Uniform { half_width } => half_width * half_width / 3.0,
        }
    }
}

/// Payoff observed through `samples` noisy evaluations, averaged.
pub fn noisy_payoff<R: Rng + ?Sized>(
    game: &MeanFieldGame,
    policy: &DeterministicPolicy,
    mu: &PopulationFlow,
    noise: &NoiseModel,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Parameter("noisy payoff needs at least one sample".into()));
    }
    let exact = payoff(game, policy, mu)?;
    Ok(exact + noise.sample_mean(samples, rng)?)
}
