use rand::Rng;
use serde::{Deserialize, Serialize};

use super::device::CorrelationDevice;
use super::learners::{BlumMansour, Hedge, Learner, RegretMatching};
use super::lp::{row_value, MinimaxSolution};
use super::trace::{compress_ce, compress_cce, RegretTrace};
use crate::error::{Error, Result};
use crate::mfg::{mixture_flow, payoffs_against, MeanFieldGame, MixedPolicy, NoiseModel, PolicySet};

/// Which regret the loop minimises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    /// External regret; the device approximates a coarse correlated equilibrium.
    #[default]
    External,
    /// Swap regret; the device approximates a correlated equilibrium.
    Internal,
}

/// External learner used directly or inside the swap-regret reduction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseLearner {
    #[default]
    RegretMatching,
    /// Hedge on range-scaled rewards; `eta` defaults to `sqrt(8 ln n / T_max)`.
    Hedge {
        #[serde(default)]
        eta: Option<f64>,
    },
}

/// How the payoff vector of each round is observed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSource {
    #[default]
    Exact,
    /// Each payoff is the mean of `samples` noisy evaluations.
    Noisy {
        #[serde(flatten)]
        noise: NoiseModel,
        samples: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegretLoopConfig {
    pub kind: RegretKind,
    pub learner: BaseLearner,
    pub max_steps: usize,
    /// Stop as soon as a compressed device has regret at most this.
    pub target_regret: f64,
    pub payoff_source: PayoffSource,
    /// Compress every this many steps (and at the last step); `0` never compresses.
    pub compress_every: usize,
}

impl Default for RegretLoopConfig {
    fn default() -> Self {
        RegretLoopConfig {
            kind: RegretKind::External,
            learner: BaseLearner::RegretMatching,
            max_steps: 5000,
            target_regret: 1e-3,
            payoff_source: PayoffSource::Exact,
            compress_every: 1,
        }
    }
}

impl RegretLoopConfig {
    /// Defaults for the given regret kind (swap regret compresses every 10 steps).
    pub fn for_kind(kind: RegretKind) -> Self {
        RegretLoopConfig {
            kind,
            compress_every: match kind {
                RegretKind::External => 1,
                RegretKind::Internal => 10,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Parameter("regret loop needs at least one step".into()));
        }
        if self.target_regret.is_nan() {
            return Err(Error::Parameter("target regret is NaN".into()));
        }
        if let BaseLearner::Hedge { eta: Some(eta) } = self.learner {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Parameter(format!("hedge rate {eta} must be > 0")));
            }
        }
        if let PayoffSource::Noisy { noise, samples } = self.payoff_source {
            noise.validate()?;
            if samples == 0 {
                return Err(Error::Parameter("noisy payoffs need at least one sample".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretLoopOutcome {
    pub device: CorrelationDevice,
    pub trace: RegretTrace,
    /// Compression that produced `device`, if compression ran.
    pub solution: Option<MinimaxSolution<f64>>,
    /// Regret of `device` on the recorded (possibly noisy) trace.
    pub regret: f64,
    pub steps: usize,
    pub reached_target: bool,
}

fn make_learner(config: &RegretLoopConfig, n: usize) -> Box<dyn Learner<f64>> {
    let eta = |eta: Option<f64>| eta.unwrap_or_else(|| Hedge::<f64>::default_rate(n, config.max_steps));
    match (config.kind, config.learner) {
        (RegretKind::External, BaseLearner::RegretMatching) => Box::new(RegretMatching::new(n)),
        (RegretKind::External, BaseLearner::Hedge { eta: e }) => Box::new(Hedge::new(n, eta(e))),
        (RegretKind::Internal, BaseLearner::RegretMatching) => Box::new(BlumMansour::regret_matching(n)),
        (RegretKind::Internal, BaseLearner::Hedge { eta: e }) => {
            let rate = eta(e);
            Box::new(BlumMansour::new((0..n).map(|_| Hedge::new(n, rate)).collect()))
        }
    }
}

fn compress(trace: &RegretTrace, kind: RegretKind) -> Result<MinimaxSolution<f64>> {
    match kind {
        RegretKind::External => compress_cce(trace),
        RegretKind::Internal => compress_ce(trace),
    }
}

fn uniform_regret(trace: &RegretTrace, kind: RegretKind) -> f64 {
    match kind {
        RegretKind::External => trace.uniform_external_regret(),
        RegretKind::Internal => trace.uniform_internal_regret(),
    }
    .unwrap_or(f64::INFINITY)
}

/// Runs a no-regret learner over the mixtures of `set`, each round observing
/// the payoff of every member against the population the mixture induces.
///
/// Rewards are divided by the game's reward range before the learner sees
/// them; the trace keeps them in game units.
pub fn run_regret_loop<R: Rng + ?Sized>(
    game: &MeanFieldGame,
    set: &PolicySet,
    config: &RegretLoopConfig,
    rng: &mut R,
) -> Result<RegretLoopOutcome> {
    run_regret_loop_observed(game, set, config, rng, |_| Ok(()))
}

/// As [`run_regret_loop`], calling `observe` with the trace after every
/// step. An error from `observe` aborts the loop.
pub fn run_regret_loop_observed<R: Rng + ?Sized>(
    game: &MeanFieldGame,
    set: &PolicySet,
    config: &RegretLoopConfig,
    rng: &mut R,
    mut observe: impl FnMut(&RegretTrace) -> Result<()>,
) -> Result<RegretLoopOutcome> {
    config.validate()?;
    let n = set.len();
    if n == 0 {
        return Err(Error::Parameter("regret loop over an empty policy set".into()));
    }
    let internal = config.kind == RegretKind::Internal;
    let mut trace = RegretTrace::new(internal);

    if n == 1 {
        let nu = MixedPolicy::pure(1, 0);
        let mu = mixture_flow(set, &nu)?;
        let payoffs = payoffs_against(game, set, &mu)?;
        trace.push(nu.clone(), payoffs)?;
        observe(&trace)?;
        return Ok(RegretLoopOutcome {
            device: CorrelationDevice::singleton(nu),
            trace,
            solution: None,
            regret: 0.0,
            steps: 1,
            reached_target: 0.0 <= config.target_regret,
        });
    }

    let scale = game.reward_range().max(f64::MIN_POSITIVE);
    let mut learner = make_learner(config, n);
    let mut best: Option<MinimaxSolution<f64>> = None;
    let mut steps = 0;
    let mut reached = false;

    for t in 1..=config.max_steps {
        let weights = learner.play()?;
        let nu = MixedPolicy::from_unnormalized(weights)?;
        let mu = mixture_flow(set, &nu)?;
        let mut payoffs = payoffs_against(game, set, &mu)?;
        if let PayoffSource::Noisy { noise, samples } = config.payoff_source {
            for j in &mut payoffs {
                *j += noise.sample_mean(samples, rng)?;
            }
        }
        let scaled: Vec<f64> = payoffs.iter().map(|j| j / scale).collect();
        trace.push(nu, payoffs)?;
        learner.observe(&scaled)?;
        steps = t;
        observe(&trace)?;

        let due = config.compress_every > 0 && (t % config.compress_every == 0 || t == config.max_steps);
        if due {
            let sol = compress(&trace, config.kind)?;
            let value = sol.value;
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(sol);
            }
            if value <= config.target_regret {
                reached = true;
                break;
            }
        }
    }

    let (device, regret, solution) = match best {
        Some(sol) => {
            let matrix = match config.kind {
                RegretKind::External => trace.external.clone(),
                RegretKind::Internal => trace.internal_matrix().unwrap_or_default(),
            };
            let cap = sol.value.max(config.target_regret);
            let (rho, value) = sparsify(&matrix, &sol.rho, cap);
            let device = CorrelationDevice::from_weighted(
                rho.iter()
                    .zip(&trace.iterates)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, nu)| (*w, nu.clone())),
            )?;
            (device, value, Some(sol))
        }
        None => {
            let regret = uniform_regret(&trace, config.kind);
            reached = regret <= config.target_regret;
            (CorrelationDevice::uniform(trace.iterates.iter().cloned())?, regret, None)
        }
    };
    Ok(RegretLoopOutcome {
        device,
        trace,
        solution,
        regret,
        steps,
        reached_target: reached,
    })
}

/// Drops the lightest atoms of `rho` for as long as the renormalised weights
/// keep the regret on `matrix` at most `cap`. Near-zero atoms otherwise leave
/// recommendations with vanishing marginals whose conditional gains are
/// arbitrary.
fn sparsify(matrix: &[Vec<f64>], rho: &[f64], cap: f64) -> (Vec<f64>, f64) {
    let mut kept = rho.to_vec();
    let mut value = row_value(matrix, &kept);
    let mut order: Vec<usize> = (0..rho.len()).filter(|&t| rho[t] > 0.0).collect();
    order.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]));
    for &t in order.iter().take(order.len().saturating_sub(1)) {
        let mut trial = kept.clone();
        trial[t] = 0.0;
        let total: f64 = trial.iter().sum();
        trial.iter_mut().for_each(|w| *w /= total);
        let v = row_value(matrix, &trial);
        if v <= cap {
            kept = trial;
            value = v;
        }
    }
    (kept, value)
}
