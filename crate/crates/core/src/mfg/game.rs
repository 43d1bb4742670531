use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::is_distribution;

/// Construction-time tolerance on probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Reward callable `r(state, action, population)`.
pub type RewardFn = dyn Fn(usize, usize, &Population<'_>) -> f64 + Send + Sync;

/// Time structure of a game.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Horizon {
    /// `steps` decision epochs, time-indexed policies.
    Finite { steps: usize },
    /// Geometric discounting, rolled out for `truncation` steps with stationary policies.
    Discounted { gamma: f64, truncation: usize },
}

impl Horizon {
    /// Discounted horizon whose truncation makes `gamma^S < 1e-8`.
    pub fn discounted(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Parameter(format!("discount factor {gamma} outside (0, 1)")));
        }
        let truncation = ((1e-8f64).ln() / gamma.ln()).floor() as usize + 1;
        Ok(Horizon::Discounted { gamma, truncation })
    }

    /// Number of rollout steps.
    pub fn len(&self) -> usize {
        match *self {
            Horizon::Finite { steps } => steps,
            Horizon::Discounted { truncation, .. } => truncation,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discounted(&self) -> bool {
        matches!(self, Horizon::Discounted { .. })
    }

    /// Payoff weight of each step: 1 for finite horizons, the normalized
    /// truncated geometric weights `gamma^s (1-gamma) / (1-gamma^S)` otherwise.
    pub fn step_weights(&self) -> Vec<f64> {
        match *self {
            Horizon::Finite { steps } => vec![1.0; steps],
            Horizon::Discounted { gamma, truncation } => {
                let norm = (1.0 - gamma) / (1.0 - gamma.powi(truncation as i32));
                let mut w = Vec::with_capacity(truncation);
                let mut g = 1.0;
                for _ in 0..truncation {
                    w.push(g * norm);
                    g *= gamma;
                }
                w
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Horizon::Finite { steps } if steps == 0 => {
                Err(Error::Parameter("finite horizon needs at least one step".into()))
            }
            Horizon::Discounted { gamma, truncation } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    Err(Error::Parameter(format!("discount factor {gamma} outside (0, 1)")))
                } else if truncation == 0 {
                    Err(Error::Parameter("discounted truncation must be positive".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// The population as seen by the reward function at one step: a state
/// distribution together with the joint state-action distribution it
/// decomposes into.
#[derive(Clone, Copy, Debug)]
pub struct Population<'a> {
    states: &'a [f64],
    state_actions: &'a [f64],
    num_actions: usize,
}

impl<'a> Population<'a> {
    /// `state_actions` is row-major `[state * num_actions + action]`.
    pub fn new(states: &'a [f64], state_actions: &'a [f64], num_actions: usize) -> Self {
        debug_assert_eq!(states.len() * num_actions, state_actions.len());
        Population {
            states,
            state_actions,
            num_actions,
        }
    }

    pub fn states(&self) -> &'a [f64] {
        self.states
    }

    pub fn state_actions(&self) -> &'a [f64] {
        self.state_actions
    }

    /// Mass on state `x`.
    pub fn state(&self, x: usize) -> f64 {
        self.states[x]
    }

    /// Mass playing `a` in state `x`.
    pub fn state_action(&self, x: usize, a: usize) -> f64 {
        self.state_actions[x * self.num_actions + a]
    }

    /// Fraction of the population playing action `a`, over all states.
    pub fn action(&self, a: usize) -> f64 {
        self.state_actions
            .chunks_exact(self.num_actions)
            .map(|row| row[a])
            .sum()
    }
}

/// A finite mean-field game with deterministic, population-independent dynamics.
#[derive(Clone)]
pub struct MeanFieldGame {
    name: String,
    num_states: usize,
    num_actions: usize,
    transitions: Vec<usize>,
    mu0: Vec<f64>,
    horizon: Horizon,
    reward: Arc<RewardFn>,
    reward_bound: f64,
}

impl fmt::Debug for MeanFieldGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeanFieldGame")
            .field("name", &self.name)
            .field("num_states", &self.num_states)
            .field("num_actions", &self.num_actions)
            .field("horizon", &self.horizon)
            .field("reward_bound", &self.reward_bound)
            .finish_non_exhaustive()
    }
}

impl MeanFieldGame {
    pub fn builder(name: impl Into<String>, num_states: usize, num_actions: usize) -> GameBuilder {
        GameBuilder {
            name: name.into(),
            num_states,
            num_actions,
            transition: None,
            reward: None,
            mu0: None,
            horizon: Horizon::Finite { steps: 1 },
            reward_bound: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    /// Successor of `state` under `action`.
    pub fn transition(&self, state: usize, action: usize) -> usize {
        self.transitions[state * self.num_actions + action]
    }

    pub fn reward(&self, state: usize, action: usize, population: &Population<'_>) -> f64 {
        (self.reward)(state, action, population)
    }

    /// Upper bound on `|r|`, used to scale learner updates.
    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    /// Width of the reward range, `2 * reward_bound`, floored away from zero.
    pub fn reward_range(&self) -> f64 {
        (2.0 * self.reward_bound).max(f64::MIN_POSITIVE)
    }
}

/// Builder for [`MeanFieldGame`].
pub struct GameBuilder {
    name: String,
    num_states: usize,
    num_actions: usize,
    transition: Option<Box<dyn Fn(usize, usize) -> usize>>,
    reward: Option<Arc<RewardFn>>,
    mu0: Option<Vec<f64>>,
    horizon: Horizon,
    reward_bound: Option<f64>,
}

impl GameBuilder {
    /// Deterministic successor function; defaults to "stay".
    pub fn transition(mut self, f: impl Fn(usize, usize) -> usize + 'static) -> Self {
        self.transition = Some(Box::new(f));
        self
    }

    pub fn reward(
        mut self,
        f: impl Fn(usize, usize, &Population<'_>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.reward = Some(Arc::new(f));
        self
    }

    /// Initial distribution; defaults to all mass on state 0.
    pub fn mu0(mut self, mu0: Vec<f64>) -> Self {
        self.mu0 = Some(mu0);
        self
    }

    pub fn horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    /// Known bound on `|r|`. When omitted it is estimated from point-mass
    /// and uniform populations.
    pub fn reward_bound(mut self, bound: f64) -> Self {
        self.reward_bound = Some(bound);
        self
    }

    pub fn build(self) -> Result<MeanFieldGame> {
        let (nx, na) = (self.num_states, self.num_actions);
        if nx == 0 || na == 0 {
            return Err(Error::Parameter(format!(
                "game `{}` needs at least one state and one action",
                self.name
            )));
        }
        self.horizon.validate()?;
        let reward = self
            .reward
            .ok_or_else(|| Error::Config(format!("game `{}` has no reward", self.name)))?;
        let mut transitions = Vec::with_capacity(nx * na);
        for x in 0..nx {
            for a in 0..na {
                let next = match &self.transition {
                    Some(f) => f(x, a),
                    None => x,
                };
                if next >= nx {
                    return Err(Error::Config(format!(
                        "transition({x}, {a}) = {next} is not a state of `{}`",
                        self.name
                    )));
                }
                transitions.push(next);
            }
        }
        let mu0 = self.mu0.unwrap_or_else(|| {
            let mut m = vec![0.0; nx];
            m[0] = 1.0;
            m
        });
        if mu0.len() != nx || !is_distribution(&mu0, PROB_TOL) {
            return Err(Error::Config(format!(
                "initial distribution of `{}` is not a distribution over {nx} states",
                self.name
            )));
        }
        let reward_bound = match self.reward_bound {
            Some(b) if b.is_finite() && b >= 0.0 => b,
            Some(b) => return Err(Error::Parameter(format!("reward bound {b} is invalid"))),
            None => estimate_reward_bound(reward.as_ref(), nx, na),
        };
        Ok(MeanFieldGame {
            name: self.name,
            num_states: nx,
            num_actions: na,
            transitions,
            mu0,
            horizon: self.horizon,
            reward,
            reward_bound,
        })
    }
}

fn estimate_reward_bound(reward: &RewardFn, nx: usize, na: usize) -> f64 {
    let mut bound: f64 = 0.0;
    let mut probe = |states: &[f64], joint: &[f64]| {
        let pop = Population::new(states, joint, na);
        for x in 0..nx {
            for a in 0..na {
                let r = reward(x, a, &pop);
                if r.is_finite() {
                    bound = bound.max(r.abs());
                }
            }
        }
    };
    let mut states = vec![0.0; nx];
    let mut joint = vec![0.0; nx * na];
    for y in 0..nx {
        for b in 0..na {
            states.iter_mut().for_each(|v| *v = 0.0);
            joint.iter_mut().for_each(|v| *v = 0.0);
            states[y] = 1.0;
            joint[y * na + b] = 1.0;
            probe(&states, &joint);
        }
    }
    let us = vec![1.0 / nx as f64; nx];
    let uj = vec![1.0 / (nx * na) as f64; nx * na];
    probe(&us, &uj);
    bound
}
