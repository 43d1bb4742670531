//! Restricted-game Nash equilibria by black-box minimisation of restricted
//! exploitability over the simplex.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{mixture_flow, payoffs_against, MeanFieldGame, MixedPolicy, PolicySet};
use crate::scalar::normalize;

/// `max_i J(pi_i, mu(nu)) - J(pi(nu), mu(nu))` over the members of `set`.
pub fn restricted_exploitability(game: &MeanFieldGame, set: &PolicySet, nu: &MixedPolicy) -> Result<f64> {
    let mu = mixture_flow(set, nu)?;
    let j = payoffs_against(game, set, &mu)?;
    let on_device: f64 = nu.weights().iter().zip(&j).map(|(w, v)| w * v).sum();
    Ok(j.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - on_device)
}

pub fn is_restricted_nash(game: &MeanFieldGame, set: &PolicySet, nu: &MixedPolicy, tol: f64) -> Result<bool> {
    Ok(restricted_exploitability(game, set, nu)? <= tol)
}

/// Starting point of the search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexInit {
    #[default]
    Uniform,
    WarmStart(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexSearchConfig {
    pub population_size: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub init: SimplexInit,
    /// Stop once the best objective is at most this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SimplexSearchConfig {
    fn default() -> Self {
        SimplexSearchConfig {
            population_size: 64,
            elite_fraction: 0.125,
            iterations: 200,
            init: SimplexInit::Uniform,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl SimplexSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::Parameter("search population must hold at least 4 candidates".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Parameter("elite fraction must lie in (0, 1)".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Parameter("search needs at least one iteration".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Parameter("search tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexSearchResult {
    pub weights: Vec<f64>,
    pub value: f64,
    pub generations: usize,
    /// Whether the tolerance was reached.
    pub converged: bool,
    /// Best objective after each generation.
    pub history: Vec<f64>,
}

const ALPHA_FLOOR: f64 = 1e-3;
const MAX_CONCENTRATION: f64 = 1e9;

/// Cross-entropy search over the `n`-simplex with Dirichlet proposals.
///
/// Generation 0 always contains the uniform point, the vertices and the
/// configured starting point. The best candidate so far survives every
/// generation, so the history is non-increasing.
pub fn minimize_on_simplex(
    n: usize,
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
    config: &SimplexSearchConfig,
) -> Result<SimplexSearchResult> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Parameter("search over an empty simplex".into()));
    }
    let mut eval = |w: &[f64]| -> Result<f64> {
        let v = objective(w)?;
        if v.is_nan() {
            return Err(Error::Numeric("objective returned NaN".into()));
        }
        Ok(v)
    };
    if n == 1 {
        let value = eval(&[1.0])?;
        return Ok(SimplexSearchResult {
            weights: vec![1.0],
            value,
            generations: 0,
            converged: value <= config.tolerance,
            history: vec![value],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let elites = ((config.population_size as f64 * config.elite_fraction).ceil() as usize).max(2);
    let start = match &config.init {
        SimplexInit::Uniform => vec![1.0 / n as f64; n],
        SimplexInit::WarmStart(w) if w.len() == n && w.iter().all(|v| *v >= 0.0) => {
            let mut w = w.clone();
            normalize(&mut w);
            w
        }
        SimplexInit::WarmStart(w) => {
            return Err(Error::Parameter(format!("warm start has {} weights, expected {n}", w.len())))
        }
    };

    let mut seeded = vec![vec![1.0 / n as f64; n], start.clone()];
    seeded.extend((0..n).map(|i| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }));
    let mut alpha: Vec<f64> = vec![1.0; n];

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut history = Vec::with_capacity(config.iterations);
    let mut generations = 0;
    for generation in 0..config.iterations {
        let mut pool: Vec<Vec<f64>> = Vec::with_capacity(config.population_size + seeded.len());
        if generation == 0 {
            pool.append(&mut seeded);
        } else if let Some((w, _)) = &best {
            pool.push(w.clone());
            pool.push(mean_of(&alpha));
        }
        let target = config.population_size.max(pool.len() + 1);
        while pool.len() < target {
            pool.push(sample_dirichlet(&alpha, &mut rng)?);
        }
        let mut scored = pool
            .into_iter()
            .map(|w| eval(&w).map(|v| (w, v)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        if best.as_ref().is_none_or(|(_, v)| scored[0].1 < *v) {
            best = Some(scored[0].clone());
        }
        let best_value = best.as_ref().map_or(f64::INFINITY, |b| b.1);
        history.push(best_value);
        generations = generation + 1;
        if best_value <= config.tolerance {
            break;
        }
        alpha = refit(&scored[..elites.min(scored.len())], n);
    }
    let (weights, value) = best.expect("at least one generation ran");
    Ok(SimplexSearchResult {
        weights,
        value,
        generations,
        converged: value <= config.tolerance,
        history,
    })
}

fn mean_of(alpha: &[f64]) -> Vec<f64> {
    let s: f64 = alpha.iter().sum();
    alpha.iter().map(|a| a / s).collect()
}

fn sample_dirichlet(alpha: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut w = alpha
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .map(|g| g.sample(rng))
                .map_err(|e| Error::Numeric(format!("dirichlet shape {a}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    normalize(&mut w);
    Ok(w)
}

/// Method-of-moments Dirichlet fit to the elite set.
fn refit(elites: &[(Vec<f64>, f64)], n: usize) -> Vec<f64> {
    let k = elites.len() as f64;
    let mean: Vec<f64> = (0..n).map(|i| elites.iter().map(|(w, _)| w[i]).sum::<f64>() / k).collect();
    let var: Vec<f64> = (0..n)
        .map(|i| elites.iter().map(|(w, _)| (w[i] - mean[i]).powi(2)).sum::<f64>() / k)
        .collect();
    let estimates: Vec<f64> = (0..n)
        .filter(|&i| var[i] > 0.0 && mean[i] > 0.0 && mean[i] < 1.0)
        .map(|i| mean[i] * (1.0 - mean[i]) / var[i] - 1.0)
        .filter(|s| s.is_finite() && *s > 0.0)
        .collect();
    let concentration = if estimates.is_empty() {
        MAX_CONCENTRATION
    } else {
        let mut e = estimates;
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    }
    .clamp(1.0, MAX_CONCENTRATION);
    mean.iter().map(|m| (m * concentration).max(ALPHA_FLOOR)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedNash {
    pub nu: MixedPolicy,
    pub exploitability: f64,
    pub converged: bool,
    pub generations: usize,
}

/// Restricted Nash equilibrium of `set` by cross-entropy search.
pub fn solve_restricted_nash(
    game: &MeanFieldGame,
    set: &PolicySet,
    config: &SimplexSearchConfig,
) -> Result<RestrictedNash> {
    if set.is_empty() {
        return Err(Error::Parameter("restricted Nash over an empty policy set".into()));
    }
    let n = set.len();
    let result = minimize_on_simplex(
        n,
        |w| restricted_exploitability(game, set, &MixedPolicy::from_unnormalized(w.to_vec())?),
        config,
    )?;
    Ok(RestrictedNash {
        nu: MixedPolicy::from_unnormalized(result.weights)?,
        exploitability: result.value,
        converged: result.converged,
        generations: result.generations,
    })
}

/// Previous solution extended to `n` policies with a little mass on the new ones.
pub fn warm_start(previous: &MixedPolicy, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|i| if i < previous.len() { previous.weight(i) } else { 1e-3 })
        .collect();
    normalize(&mut w);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{biased_rps, coop_betray_punish, A};
    use crate::mfg::DeterministicPolicy;

    fn full(game: &MeanFieldGame) -> PolicySet {
        PolicySet::from_policies(game, (0..3).map(|a| DeterministicPolicy::constant(game, a))).unwrap()
    }

    fn nash() -> MixedPolicy {
        MixedPolicy::new(vec![15.0 / 71.0, 21.0 / 71.0, 35.0 / 71.0]).unwrap()
    }

    #[test]
    fn exploitability_examples() {
        let g = biased_rps();
        let set = full(&g);
        let e = restricted_exploitability(&g, &set, &MixedPolicy::pure(3, A)).unwrap();
        assert!((e - 0.7).abs() < 1e-12);
        assert!(restricted_exploitability(&g, &set, &nash()).unwrap().abs() < 1e-10);
        assert!(is_restricted_nash(&g, &set, &nash(), 1e-6).unwrap());
        assert!(!is_restricted_nash(&g, &set, &MixedPolicy::pure(3, A), 1e-6).unwrap());
        let single = PolicySet::from_policies(&g, [DeterministicPolicy::lowest(&g)]).unwrap();
        assert_eq!(restricted_exploitability(&g, &single, &MixedPolicy::pure(1, 0)).unwrap(), 0.0);
        assert!(is_restricted_nash(&g, &single, &MixedPolicy::pure(1, 0), 0.0).unwrap());
    }

    #[test]
    fn finds_biased_rps_equilibrium() {
        let g = biased_rps();
        let r = solve_restricted_nash(&g, &full(&g), &SimplexSearchConfig::default()).unwrap();
        assert!(r.exploitability < 1e-3, "{r:?}");
        for (w, t) in r.nu.weights().iter().zip(nash().weights()) {
            assert!((w - t).abs() < 1e-2, "{r:?}");
        }
    }

    #[test]
    fn single_policy_short_circuits() {
        let g = coop_betray_punish();
        let set = PolicySet::from_policies(&g, [DeterministicPolicy::lowest(&g)]).unwrap();
        let r = solve_restricted_nash(&g, &set, &SimplexSearchConfig::default()).unwrap();
        assert_eq!(r.nu, MixedPolicy::pure(1, 0));
        assert_eq!(r.exploitability, 0.0);
        assert_eq!(r.generations, 0);
    }

    #[test]
    fn history_is_monotone_and_beats_uniform() {
        let g = coop_betray_punish();
        let set = full(&g);
        let cfg = SimplexSearchConfig { iterations: 30, ..Default::default() };
        let mut f = |w: &[f64]| restricted_exploitability(&g, &set, &MixedPolicy::from_unnormalized(w.to_vec())?);
        let r = minimize_on_simplex(3, &mut f, &cfg).unwrap();
        assert!(r.history.windows(2).all(|p| p[1] <= p[0]));
        assert!(r.value <= f(&[1.0 / 3.0; 3]).unwrap());
    }

    #[test]
    fn warm_start_pads_new_policies() {
        let w = warm_start(&MixedPolicy::new(vec![0.5, 0.5]).unwrap(), 3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[2] - 1e-3 / 1.001).abs() < 1e-15);
    }

    #[test]
    fn config_is_validated() {
        let bad = SimplexSearchConfig { population_size: 3, ..Default::default() };
        assert!(minimize_on_simplex(2, |_| Ok(0.0), &bad).is_err());
    }
}
