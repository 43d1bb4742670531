use serde::{Deserialize, Serialize};

use super::game::{Horizon, MeanFieldGame, Population};
use super::policy::{DeterministicPolicy, MixedPolicy, PolicySet, StochasticPolicy};
use crate::error::{Error, Result};

/// Per-step population occupancy. Every step holds a state distribution and
/// the state-action distribution it splits into. Discounted flows also carry
/// the normalised discounted aggregate, which is what the reward observes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationFlow {
    horizon: Horizon,
    num_actions: usize,
    states: Vec<Vec<f64>>,
    state_actions: Vec<Vec<f64>>,
    aggregate: Option<(Vec<f64>, Vec<f64>)>,
}

impl PopulationFlow {
    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// State distribution at `step`.
    pub fn states(&self, step: usize) -> &[f64] {
        &self.states[step]
    }

    /// State-action distribution at `step`, row-major by state.
    pub fn state_actions(&self, step: usize) -> &[f64] {
        &self.state_actions[step]
    }

    /// The population handed to the reward at `step`: the step slice for
    /// finite horizons, the discounted aggregate otherwise.
    pub fn population(&self, step: usize) -> Population<'_> {
        match &self.aggregate {
            Some((s, sa)) => Population::new(s, sa, self.num_actions),
            None => Population::new(&self.states[step], &self.state_actions[step], self.num_actions),
        }
    }

    /// Action marginal at `step`.
    pub fn action_marginal(&self, step: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions];
        for row in self.state_actions[step].chunks_exact(self.num_actions) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// Largest deviation of any slice's mass from 1.
    pub fn conservation_error(&self) -> f64 {
        self.states
            .iter()
            .chain(self.state_actions.iter())
            .map(|v| (v.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn compatible(&self, game: &MeanFieldGame) -> Result<()> {
        if self.horizon != game.horizon()
            || self.num_actions != game.num_actions()
            || self.states.first().map(Vec::len) != Some(game.num_states())
        {
            return Err(Error::Config(format!(
                "population flow does not match game `{}`",
                game.name()
            )));
        }
        Ok(())
    }

    fn zeros_like(&self) -> Self {
        PopulationFlow {
            horizon: self.horizon,
            num_actions: self.num_actions,
            states: self.states.iter().map(|v| vec![0.0; v.len()]).collect(),
            state_actions: self.state_actions.iter().map(|v| vec![0.0; v.len()]).collect(),
            aggregate: self
                .aggregate
                .as_ref()
                .map(|(s, sa)| (vec![0.0; s.len()], vec![0.0; sa.len()])),
        }
    }

    fn add_scaled(&mut self, other: &PopulationFlow, w: f64) {
        let axpy = |dst: &mut Vec<f64>, src: &Vec<f64>| {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
        };
        for (d, s) in self.states.iter_mut().zip(&other.states) {
            axpy(d, s);
        }
        for (d, s) in self.state_actions.iter_mut().zip(&other.state_actions) {
            axpy(d, s);
        }
        if let (Some((ds, dsa)), Some((ss, ssa))) = (&mut self.aggregate, &other.aggregate) {
            axpy(ds, ss);
            axpy(dsa, ssa);
        }
    }

    /// Convex combination `sum_k w_k flow_k`. Weights must sum to one.
    pub fn convex_combination<'a>(
        parts: impl IntoIterator<Item = (f64, &'a PopulationFlow)>,
    ) -> Result<Self> {
        let mut out: Option<PopulationFlow> = None;
        for (w, f) in parts {
            let acc = out.get_or_insert_with(|| f.zeros_like());
            if acc.horizon != f.horizon || acc.states.len() != f.states.len() {
                return Err(Error::Config("mixing flows of different games".into()));
            }
            if w != 0.0 {
                acc.add_scaled(f, w);
            }
        }
        out.ok_or_else(|| Error::Parameter("empty flow combination".into()))
    }
}

/// Forward propagation of `mu0` under per-step action probabilities.
fn propagate(game: &MeanFieldGame, probs: impl Fn(usize, usize, usize) -> f64) -> PopulationFlow {
    let (nx, na) = (game.num_states(), game.num_actions());
    let horizon = game.horizon();
    let steps = horizon.len();
    let mut states = Vec::with_capacity(steps);
    let mut state_actions = Vec::with_capacity(steps);
    let mut current = game.mu0().to_vec();
    for s in 0..steps {
        let mut sa = vec![0.0; nx * na];
        let mut next = vec![0.0; nx];
        for x in 0..nx {
            let m = current[x];
            if m == 0.0 {
                continue;
            }
            for a in 0..na {
                let p = probs(s, x, a);
                if p == 0.0 {
                    continue;
                }
                let mass = m * p;
                sa[x * na + a] += mass;
                next[game.transition(x, a)] += mass;
            }
        }
        states.push(std::mem::replace(&mut current, next));
        state_actions.push(sa);
    }
    let aggregate = horizon.is_discounted().then(|| {
        let w = horizon.step_weights();
        let mut s_agg = vec![0.0; nx];
        let mut sa_agg = vec![0.0; nx * na];
        for (k, wk) in w.iter().enumerate() {
            s_agg.iter_mut().zip(&states[k]).for_each(|(d, v)| *d += wk * v);
            sa_agg.iter_mut().zip(&state_actions[k]).for_each(|(d, v)| *d += wk * v);
        }
        (s_agg, sa_agg)
    });
    PopulationFlow {
        horizon,
        num_actions: na,
        states,
        state_actions,
        aggregate,
    }
}

/// Occupancy flow of the population when everyone plays `policy`.
pub fn occupancy_flow(game: &MeanFieldGame, policy: &DeterministicPolicy) -> Result<PopulationFlow> {
    policy.validate(game)?;
    Ok(propagate(game, |s, x, a| {
        if policy.action(s, x) == a {
            1.0
        } else {
            0.0
        }
    }))
}

/// Occupancy flow of a behavioural policy.
pub fn stochastic_flow(game: &MeanFieldGame, policy: &StochasticPolicy) -> PopulationFlow {
    propagate(game, |s, x, a| policy.prob(s, x, a))
}

/// Flow induced by a population distributed over `set` according to `nu`.
/// Dynamics do not depend on the population, so this is the mixture of
/// the cached per-policy flows.
pub fn mixture_flow(set: &PolicySet, nu: &MixedPolicy) -> Result<PopulationFlow> {
    set.check_mixture(nu)?;
    PopulationFlow::convex_combination(
        nu.weights()
            .iter()
            .enumerate()
            .map(|(i, &w)| (w, set.flow(i))),
    )
}
