use serde::{Deserialize, Serialize};

use super::flow::{occupancy_flow, PopulationFlow};
use super::game::{Horizon, MeanFieldGame, PROB_TOL};
use crate::error::{Error, Result};
use crate::scalar::is_distribution;

/// A pure policy. Finite-horizon games use one action table per step,
/// discounted games a single stationary table. Equality is equality of
/// the action tables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterministicPolicy {
    /// `table[step][state]`.
    TimeIndexed(Vec<Vec<usize>>),
    /// `table[state]`.
    Stationary(Vec<usize>),
}

impl DeterministicPolicy {
    /// The policy playing `action` everywhere.
    pub fn constant(game: &MeanFieldGame, action: usize) -> Self {
        let row = vec![action; game.num_states()];
        match game.horizon() {
            Horizon::Finite { steps } => DeterministicPolicy::TimeIndexed(vec![row; steps]),
            Horizon::Discounted { .. } => DeterministicPolicy::Stationary(row),
        }
    }

    /// The all-lowest-action policy.
    pub fn lowest(game: &MeanFieldGame) -> Self {
        Self::constant(game, 0)
    }

    pub fn action(&self, step: usize, state: usize) -> usize {
        match self {
            DeterministicPolicy::TimeIndexed(t) => t[step][state],
            DeterministicPolicy::Stationary(t) => t[state],
        }
    }

    /// Checks that the policy is total over the game's steps and states and
    /// matches its horizon mode.
    pub fn validate(&self, game: &MeanFieldGame) -> Result<()> {
        let rows: &[Vec<usize>] = match (self, game.horizon()) {
            (DeterministicPolicy::TimeIndexed(t), Horizon::Finite { steps }) => {
                if t.len() != steps {
                    return Err(Error::Config(format!(
                        "policy has {} steps, game `{}` has {steps}",
                        t.len(),
                        game.name()
                    )));
                }
                t
            }
            (DeterministicPolicy::Stationary(t), Horizon::Discounted { .. }) => {
                std::slice::from_ref(t)
            }
            _ => {
                return Err(Error::Config(format!(
                    "policy horizon mode does not match game `{}`",
                    game.name()
                )))
            }
        };
        for row in rows {
            if row.len() != game.num_states() || row.iter().any(|&a| a >= game.num_actions()) {
                return Err(Error::Config(format!(
                    "policy table is not total over the states and actions of `{}`",
                    game.name()
                )));
            }
        }
        Ok(())
    }
}

/// Behavioural (per-state randomised) policy, used by the mirror-descent baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    /// `probs[step][state * num_actions + action]`; a single row when stationary.
    probs: Vec<Vec<f64>>,
    num_actions: usize,
}

impl StochasticPolicy {
    pub fn uniform(game: &MeanFieldGame) -> Self {
        let na = game.num_actions();
        let rows = match game.horizon() {
            Horizon::Finite { steps } => steps,
            Horizon::Discounted { .. } => 1,
        };
        StochasticPolicy {
            probs: vec![vec![1.0 / na as f64; game.num_states() * na]; rows],
            num_actions: na,
        }
    }

    pub fn from_rows(probs: Vec<Vec<f64>>, num_actions: usize) -> Self {
        StochasticPolicy { probs, num_actions }
    }

    pub fn prob(&self, step: usize, state: usize, action: usize) -> f64 {
        let row = if self.probs.len() == 1 { 0 } else { step };
        self.probs[row][state * self.num_actions + action]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

/// A distribution over the entries of a [`PolicySet`], stored densely by
/// index. It may be shorter than the set it refers to; missing entries
/// carry zero weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedPolicy {
    weights: Vec<f64>,
}

impl MixedPolicy {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if !is_distribution(&weights, PROB_TOL) {
            return Err(Error::Parameter(format!(
                "mixture weights {weights:?} are not a distribution"
            )));
        }
        Ok(MixedPolicy {
            weights: weights.into_iter().map(|w| w.max(0.0)).collect(),
        })
    }

    /// Normalises non-negative weights.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter("mixture weights must be finite and >= 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Parameter("mixture weights have no mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(MixedPolicy { weights })
    }

    pub fn pure(n: usize, index: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        MixedPolicy { weights }
    }

    pub fn uniform(n: usize) -> Self {
        MixedPolicy {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights.get(index).copied().unwrap_or(0.0)
    }

    /// Indices with positive weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
    }

    /// Same distribution over a set of `n >= len` policies.
    pub fn padded(&self, n: usize) -> Self {
        let mut weights = self.weights.clone();
        weights.resize(n.max(weights.len()), 0.0);
        MixedPolicy { weights }
    }
}

#[derive(Clone, Debug)]
struct PolicyEntry {
    policy: DeterministicPolicy,
    flow: PopulationFlow,
}

/// Ordered, duplicate-free set of pure policies with cached occupancy flows.
#[derive(Clone, Debug, Default)]
pub struct PolicySet {
    entries: Vec<PolicyEntry>,
}

impl PolicySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_policies(
        game: &MeanFieldGame,
        policies: impl IntoIterator<Item = DeterministicPolicy>,
    ) -> Result<Self> {
        let mut set = PolicySet::new();
        for p in policies {
            set.insert(game, p)?;
        }
        Ok(set)
    }

    /// Inserts `policy` unless already present. Returns its index and whether
    /// it was new.
    pub fn insert(&mut self, game: &MeanFieldGame, policy: DeterministicPolicy) -> Result<(usize, bool)> {
        if let Some(i) = self.position(&policy) {
            return Ok((i, false));
        }
        let flow = occupancy_flow(game, &policy)?;
        self.entries.push(PolicyEntry { policy, flow });
        Ok((self.entries.len() - 1, true))
    }

    pub fn position(&self, policy: &DeterministicPolicy) -> Option<usize> {
        self.entries.iter().position(|e| &e.policy == policy)
    }

    pub fn contains(&self, policy: &DeterministicPolicy) -> bool {
        self.position(policy).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn policy(&self, index: usize) -> &DeterministicPolicy {
        &self.entries[index].policy
    }

    pub fn flow(&self, index: usize) -> &PopulationFlow {
        &self.entries[index].flow
    }

    pub fn policies(&self) -> impl Iterator<Item = &DeterministicPolicy> {
        self.entries.iter().map(|e| &e.policy)
    }

    /// Copy of the policies' action tables, in set order.
    pub fn to_policies(&self) -> Vec<DeterministicPolicy> {
        self.policies().cloned().collect()
    }

    /// Keeps only the listed indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut entries = Vec::with_capacity(indices.len());
        for &i in indices {
            let e = self
                .entries
                .get(i)
                .ok_or_else(|| Error::Lookup(format!("policy index {i} out of range")))?;
            if entries.iter().any(|x: &PolicyEntry| x.policy == e.policy) {
                return Err(Error::Parameter(format!("duplicate index {i} in subset")));
            }
            entries.push(e.clone());
        }
        Ok(PolicySet { entries })
    }

    pub(crate) fn check_mixture(&self, nu: &MixedPolicy) -> Result<()> {
        if nu.len() > self.len() {
            return Err(Error::Lookup(format!(
                "mixture over {} policies but the set holds {}",
                nu.len(),
                self.len()
            )));
        }
        Ok(())
    }
}
