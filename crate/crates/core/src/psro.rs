//! Mean-field PSRO outer loops: restricted-Nash PSRO and the sped-up
//! regret-minimising PSRO for correlated and coarse-correlated equilibria.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{best_response, br_ce, br_cce, BestResponseResult};
use crate::error::{Error, Result};
use crate::metrics::{self, GapKind, GapReport};
use crate::mfg::{mixture_flow, payoffs_against, DeterministicPolicy, MeanFieldGame, MixedPolicy, PolicySet};
use crate::nash::{solve_restricted_nash, warm_start, SimplexInit, SimplexSearchConfig};
use crate::regret::{
    run_regret_loop, BaseLearner, CorrelationDevice, PayoffSource, RegretKind, RegretLoopConfig,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsroMode {
    #[default]
    Nash,
    Cce,
    Ce,
}

impl PsroMode {
    pub fn gap_kind(self) -> GapKind {
        match self {
            PsroMode::Nash => GapKind::Nash,
            PsroMode::Cce => GapKind::Cce,
            PsroMode::Ce => GapKind::Ce,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsroConfig {
    pub mode: PsroMode,
    /// Regret the restricted solver must reach; halved on refinement rounds.
    pub rho_tol: f64,
    /// Refinement stops once `rho_tol` reaches this.
    pub rho_lim: f64,
    /// Compression period of the inner loop; `None` picks 1 (CCE) or 10 (CE).
    pub tau_compress: Option<usize>,
    pub max_iterations: usize,
    /// Step budget of each inner regret loop.
    pub inner_steps: usize,
    pub learner: BaseLearner,
    pub payoff_source: PayoffSource,
    pub seed: u64,
    /// Restricted Nash search (mode `nash`).
    pub search: SimplexSearchConfig,
}

impl Default for PsroConfig {
    fn default() -> Self {
        PsroConfig {
            mode: PsroMode::Nash,
            rho_tol: 1e-2,
            rho_lim: 1e-6,
            tau_compress: None,
            max_iterations: 50,
            inner_steps: 5000,
            learner: BaseLearner::RegretMatching,
            payoff_source: PayoffSource::Exact,
            seed: 0,
            search: SimplexSearchConfig::default(),
        }
    }
}

impl PsroConfig {
    pub fn for_mode(mode: PsroMode) -> Self {
        PsroConfig { mode, ..Self::default() }
    }

    pub fn tau(&self) -> usize {
        self.tau_compress.unwrap_or(match self.mode {
            PsroMode::Ce => 10,
            _ => 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_lim > 0.0 && self.rho_lim <= self.rho_tol && self.rho_tol.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < rho_lim <= rho_tol, got rho_lim = {}, rho_tol = {}",
                self.rho_lim, self.rho_tol
            )));
        }
        if self.tau_compress == Some(0) {
            return Err(Error::Parameter("tau_compress must be >= 1".into()));
        }
        if self.inner_steps == 0 {
            return Err(Error::Parameter("inner_steps must be >= 1".into()));
        }
        self.search.validate()
    }
}

/// One outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsroIteration {
    pub iteration: usize,
    /// True-game gap of the equilibrium held after this iteration.
    pub gap: f64,
    /// Regret of that equilibrium inside the restricted game.
    pub restricted_regret: f64,
    pub inner_steps: usize,
    pub policies: usize,
    pub new_policies: usize,
    pub rho_tol: f64,
    /// Whether the inner solver reached its target.
    pub inner_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsroResult {
    pub config: PsroConfig,
    pub policies: Vec<DeterministicPolicy>,
    pub equilibrium: CorrelationDevice,
    pub log: Vec<PsroIteration>,
    pub terminated: bool,
    /// `rho_tol` in force when the loop stopped.
    pub final_rho_tol: f64,
    pub final_gap: Option<GapReport>,
}

impl PsroResult {
    pub fn policy_set(&self, game: &MeanFieldGame) -> Result<PolicySet> {
        PolicySet::from_policies(game, self.policies.iter().cloned())
    }

    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

/// Runs the loop selected by `config.mode`.
pub fn run_psro(game: &MeanFieldGame, config: &PsroConfig) -> Result<PsroResult> {
    run_psro_observed(game, config, |_| {})
}

/// As [`run_psro`], calling `observe` after every outer iteration.
pub fn run_psro_observed(
    game: &MeanFieldGame,
    config: &PsroConfig,
    observe: impl FnMut(&PsroIteration),
) -> Result<PsroResult> {
    config.validate()?;
    match config.mode {
        PsroMode::Nash => nash_loop(game, config, observe),
        PsroMode::Cce | PsroMode::Ce => regret_loop(game, config, observe),
    }
}

pub fn run_psro_nash(game: &MeanFieldGame, config: &PsroConfig) -> Result<PsroResult> {
    run_psro(game, &PsroConfig { mode: PsroMode::Nash, ..config.clone() })
}

pub fn run_psro_cce(game: &MeanFieldGame, config: &PsroConfig) -> Result<PsroResult> {
    run_psro(game, &PsroConfig { mode: PsroMode::Cce, ..config.clone() })
}

pub fn run_psro_ce(game: &MeanFieldGame, config: &PsroConfig) -> Result<PsroResult> {
    run_psro(game, &PsroConfig { mode: PsroMode::Ce, ..config.clone() })
}

fn initial_set(game: &MeanFieldGame) -> Result<PolicySet> {
    PolicySet::from_policies(game, [DeterministicPolicy::lowest(game)])
}

/// Whether `br` improves on every member of the set by more than `slack`
/// under the objective `sum_t w_t J(., mu_t)`.
fn improves(br: &BestResponseResult, member_values: &[f64], slack: f64) -> bool {
    let best_member = member_values.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    br.value > best_member + slack
}

fn weighted(payoffs: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = payoffs.first().map_or(0, Vec::len);
    (0..n).map(|i| weights.iter().zip(payoffs).map(|(w, j)| w * j[i]).sum()).collect()
}

fn nash_loop(
    game: &MeanFieldGame,
    config: &PsroConfig,
    mut observe: impl FnMut(&PsroIteration),
) -> Result<PsroResult> {
    let mut set = initial_set(game)?;
    let mut nu = MixedPolicy::pure(1, 0);
    let mut log = Vec::new();
    let mut terminated = false;
    let mut final_gap = None;

    for iteration in 1..=config.max_iterations {
        let search = SimplexSearchConfig {
            init: if iteration == 1 {
                SimplexInit::Uniform
            } else {
                SimplexInit::WarmStart(warm_start(&nu, set.len()))
            },
            seed: config.search.seed.wrapping_add(config.seed).wrapping_add(iteration as u64),
            ..config.search.clone()
        };
        let restricted = solve_restricted_nash(game, &set, &search)?;
        nu = restricted.nu;

        let mu = mixture_flow(&set, &nu)?;
        let br = best_response(game, &mu)?;
        let members = payoffs_against(game, &set, &mu)?;
        let on_device: f64 = nu.weights().iter().zip(&members).map(|(w, j)| w * j).sum();
        let gap = br.value - on_device;
        let present = set.contains(&br.policy) || !improves(&br, &members, config.rho_lim);
        let stop = present || gap <= config.rho_lim;
        let new_policies = if stop { 0 } else { usize::from(set.insert(game, br.policy.clone())?.1) };
        final_gap = Some(GapReport { kind: GapKind::Nash, value: gap, witness: br.policy, recommendation: None });

        let record = PsroIteration {
            iteration,
            gap,
            restricted_regret: restricted.exploitability,
            inner_steps: restricted.generations,
            policies: set.len(),
            new_policies,
            rho_tol: config.rho_tol,
            inner_converged: restricted.converged,
        };
        observe(&record);
        log.push(record);
        if stop {
            terminated = true;
            break;
        }
    }
    let width = set.len();
    Ok(PsroResult {
        config: config.clone(),
        policies: set.to_policies(),
        equilibrium: CorrelationDevice::singleton(nu.padded(width)),
        log,
        terminated,
        final_rho_tol: config.rho_tol,
        final_gap,
    })
}

/// Best responses to `device`: one coarse deviation (CCE) or one per
/// recommendation with positive probability (CE). Returns the policies that
/// are new and improve on the set by more than `slack`.
fn device_best_responses(
    game: &MeanFieldGame,
    set: &PolicySet,
    device: &CorrelationDevice,
    mode: PsroMode,
    slack: f64,
) -> Result<Vec<DeterministicPolicy>> {
    let payoffs: Vec<Vec<f64>> = device
        .atoms()
        .iter()
        .map(|a| payoffs_against(game, set, &mixture_flow(set, &a.nu)?))
        .collect::<Result<_>>()?;
    let mut out: Vec<DeterministicPolicy> = Vec::new();
    let mut consider = |br: BestResponseResult, weights: &[f64]| {
        if !set.contains(&br.policy) && improves(&br, &weighted(&payoffs, weights), slack) && !out.contains(&br.policy) {
            out.push(br.policy);
        }
    };
    match mode {
        PsroMode::Cce => {
            let w: Vec<f64> = device.atoms().iter().map(|a| a.weight).collect();
            consider(br_cce(game, set, device)?, &w);
        }
        PsroMode::Ce => {
            for i in 0..device.width().min(set.len()) {
                if device.marginal(i) > 0.0 {
                    let w = device.conditional_weights(i)?;
                    consider(br_ce(game, set, device, i)?, &w);
                }
            }
        }
        PsroMode::Nash => unreachable!("nash mode uses its own loop"),
    }
    Ok(out)
}

fn regret_loop(
    game: &MeanFieldGame,
    config: &PsroConfig,
    mut observe: impl FnMut(&PsroIteration),
) -> Result<PsroResult> {
    let kind = match config.mode {
        PsroMode::Ce => RegretKind::Internal,
        _ => RegretKind::External,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut set = initial_set(game)?;
    let mut device = CorrelationDevice::singleton(MixedPolicy::pure(1, 0));
    let mut tol = config.rho_tol;
    let mut log = Vec::new();
    let mut terminated = false;
    let mut last_gap: Option<GapReport> = None;

    for iteration in 1..=config.max_iterations {
        let fresh = device_best_responses(game, &set, &device, config.mode, config.rho_lim)?;
        if fresh.is_empty() {
            if tol <= config.rho_lim {
                terminated = true;
                break;
            }
            tol = (tol / 2.0).max(config.rho_lim);
        }
        let mut new_policies = 0;
        for p in fresh {
            new_policies += usize::from(set.insert(game, p)?.1);
        }

        let inner = run_regret_loop(
            game,
            &set,
            &RegretLoopConfig {
                kind,
                learner: config.learner,
                max_steps: config.inner_steps,
                target_regret: tol,
                payoff_source: config.payoff_source,
                compress_every: config.tau(),
            },
            &mut rng,
        )?;
        device = inner.device;
        let report = metrics::gap(config.mode.gap_kind(), game, &set, &device)?;
        let record = PsroIteration {
            iteration,
            gap: report.value,
            restricted_regret: inner.regret,
            inner_steps: inner.steps,
            policies: set.len(),
            new_policies,
            rho_tol: tol,
            inner_converged: inner.reached_target,
        };
        last_gap = Some(report);
        observe(&record);
        log.push(record);
    }
    let final_gap = match last_gap {
        Some(g) => Some(g),
        None => Some(metrics::gap(config.mode.gap_kind(), game, &set, &device)?),
    };
    Ok(PsroResult {
        config: config.clone(),
        policies: set.to_policies(),
        equilibrium: device,
        log,
        terminated,
        final_rho_tol: tol,
        final_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{biased_rps, dominant_action};

    #[test]
    fn dominant_action_nash_terminates_at_iteration_two() {
        let g = dominant_action();
        let r = run_psro_nash(&g, &PsroConfig::default()).unwrap();
        assert!(r.terminated);
        assert_eq!(r.iterations(), 2);
        assert_eq!(r.policies.len(), 2);
        assert_eq!(r.policies[1], DeterministicPolicy::constant(&g, 2));
        assert_eq!(r.equilibrium.atoms()[0].nu, MixedPolicy::pure(2, 1));
    }

    #[test]
    fn zero_iterations_returns_initial_set() {
        let g = biased_rps();
        let cfg = PsroConfig { max_iterations: 0, ..Default::default() };
        for mode in [PsroMode::Nash, PsroMode::Cce] {
            let r = run_psro(&g, &PsroConfig { mode, ..cfg.clone() }).unwrap();
            assert!(!r.terminated);
            assert_eq!(r.policies, vec![DeterministicPolicy::lowest(&g)]);
            assert!(r.log.is_empty());
        }
    }

    #[test]
    fn biased_rps_nash() {
        let g = biased_rps();
        let r = run_psro_nash(&g, &PsroConfig::default()).unwrap();
        assert!(r.terminated);
        assert!(r.iterations() <= 10);
        assert!(r.final_gap.unwrap().value < 1e-3);
    }

    #[test]
    fn dominant_action_cce_refines_to_limit() {
        let g = dominant_action();
        let cfg = PsroConfig::for_mode(PsroMode::Cce);
        let r = run_psro(&g, &cfg).unwrap();
        assert!(r.terminated);
        assert_eq!(r.final_rho_tol, cfg.rho_lim);
        assert!(r.final_gap.unwrap().value <= cfg.rho_lim);
        assert!(r.log.windows(2).all(|w| w[1].policies >= w[0].policies));
    }

    #[test]
    fn immediate_termination_when_nothing_to_refine() {
        // zero game: the initial policy is already a best response
        let g = crate::games::zero_reward(2, 2, 2).unwrap();
        let cfg = PsroConfig { rho_tol: 1e-6, rho_lim: 1e-6, ..PsroConfig::for_mode(PsroMode::Cce) };
        let r = run_psro(&g, &cfg).unwrap();
        assert!(r.terminated);
        assert!(r.log.is_empty());
    }

    #[test]
    fn ce_adds_dominant_action() {
        let g = dominant_action();
        let r = run_psro(&g, &PsroConfig::for_mode(PsroMode::Ce)).unwrap();
        assert!(r.policies.contains(&DeterministicPolicy::constant(&g, 2)));
        assert!(r.terminated);
        assert!(r.final_gap.unwrap().value <= 1e-6);
    }

    #[test]
    fn bad_tolerances_are_rejected() {
        let g = biased_rps();
        let cfg = PsroConfig { rho_tol: 1e-3, rho_lim: 1e-2, ..Default::default() };
        assert!(run_psro(&g, &cfg).is_err());
    }
}
