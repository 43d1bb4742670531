//! Reference learners for comparison with PSRO: flow-averaging fictitious
//! play and online mirror descent with an entropic mirror map.

use serde::{Deserialize, Serialize};

use crate::best_response::{best_response, best_response_to_table};
use crate::error::{Error, Result};
use crate::metrics::policy_exploitability;
use crate::mfg::{
    occupancy_flow, stochastic_flow, DeterministicPolicy, MeanFieldGame, PopulationFlow, RewardTable,
    StochasticPolicy,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Baseline {
    #[serde(rename = "fp")]
    FictitiousPlay,
    #[serde(rename = "omd")]
    MirrorDescent { learning_rate: f64 },
}

impl Baseline {
    /// Label used in curve files: `fp` or `omd(<rate>)`.
    pub fn label(&self) -> String {
        match self {
            Baseline::FictitiousPlay => "fp".into(),
            Baseline::MirrorDescent { learning_rate } => format!("omd({learning_rate})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub exploitability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub algorithm: Baseline,
    pub iterations: usize,
    /// One point per iteration, measured after that iteration's update.
    pub curve: Vec<CurvePoint>,
    /// Fictitious play: the initial policy followed by every best response,
    /// so the averaged flow is the uniform mixture over this list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<DeterministicPolicy>>,
    /// Mirror descent: the final behavioural policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<StochasticPolicy>,
}

impl BaselineRun {
    pub fn final_exploitability(&self) -> Option<f64> {
        self.curve.last().map(|p| p.exploitability)
    }
}

pub fn fictitious_play(game: &MeanFieldGame, iterations: usize) -> Result<BaselineRun> {
    run_baseline(game, Baseline::FictitiousPlay, iterations, |_| {})
}

pub fn online_mirror_descent(game: &MeanFieldGame, iterations: usize, learning_rate: f64) -> Result<BaselineRun> {
    run_baseline(game, Baseline::MirrorDescent { learning_rate }, iterations, |_| {})
}

/// Runs `algorithm` for `iterations` steps, calling `observe` after each.
pub fn run_baseline(
    game: &MeanFieldGame,
    algorithm: Baseline,
    iterations: usize,
    observe: impl FnMut(&CurvePoint),
) -> Result<BaselineRun> {
    if iterations == 0 {
        return Err(Error::Parameter("baseline needs at least one iteration".into()));
    }
    match algorithm {
        Baseline::FictitiousPlay => fp(game, iterations, observe),
        Baseline::MirrorDescent { learning_rate } => {
            if !(learning_rate > 0.0 && learning_rate.is_finite()) {
                return Err(Error::Parameter(format!("learning rate {learning_rate} must be positive")));
            }
            omd(game, iterations, learning_rate, observe)
        }
    }
}

fn fp(game: &MeanFieldGame, iterations: usize, mut observe: impl FnMut(&CurvePoint)) -> Result<BaselineRun> {
    let initial = DeterministicPolicy::lowest(game);
    let mut average = occupancy_flow(game, &initial)?;
    let mut history = vec![initial];
    let mut curve = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        let br = best_response(game, &average)?;
        let flow = occupancy_flow(game, &br.policy)?;
        let w = 1.0 / (k + 1) as f64;
        average = PopulationFlow::convex_combination([(1.0 - w, &average), (w, &flow)])?;
        history.push(br.policy);

        // The averaged population plays against itself, so its payoff is
        // the table evaluated at its own occupancy.
        let table = RewardTable::new(game, &average)?;
        let gap = best_response_to_table(game, &table)?.value - table.evaluate(&average);
        let point = CurvePoint {
            iteration: k,
            exploitability: gap,
        };
        observe(&point);
        curve.push(point);
    }
    Ok(BaselineRun {
        algorithm: Baseline::FictitiousPlay,
        iterations,
        curve,
        history: Some(history),
        policy: None,
    })
}

/// `Q[row][x * na + a]` of `policy` against the environment `table`, by
/// backward induction over the rollout steps. Stationary policies keep
/// only the step-0 values.
fn q_values(game: &MeanFieldGame, table: &RewardTable, policy: &StochasticPolicy) -> Vec<Vec<f64>> {
    let (nx, na) = (game.num_states(), game.num_actions());
    let steps = table.steps();
    let mut q = vec![vec![0.0; nx * na]; steps];
    let mut next = vec![0.0; nx];
    for s in (0..steps).rev() {
        let mut v = vec![0.0; nx];
        for x in 0..nx {
            for a in 0..na {
                let qa = table.get(s, x, a) + next[game.transition(x, a)];
                q[s][x * na + a] = qa;
                v[x] += policy.prob(s, x, a) * qa;
            }
        }
        next = v;
    }
    q.truncate(policy.rows().len());
    q
}

fn softmax_rows(y: &[Vec<f64>], na: usize, rate: f64) -> Vec<Vec<f64>> {
    y.iter()
        .map(|row| {
            let mut out = Vec::with_capacity(row.len());
            for chunk in row.chunks(na) {
                let m = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = chunk.iter().map(|v| (rate * (v - m)).exp()).collect();
                let z: f64 = e.iter().sum();
                out.extend(e.into_iter().map(|v| v / z));
            }
            out
        })
        .collect()
}

fn omd(
    game: &MeanFieldGame,
    iterations: usize,
    rate: f64,
    mut observe: impl FnMut(&CurvePoint),
) -> Result<BaselineRun> {
    let na = game.num_actions();
    let mut policy = StochasticPolicy::uniform(game);
    let mut y: Vec<Vec<f64>> = policy.rows().iter().map(|r| vec![0.0; r.len()]).collect();
    let mut curve = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        let mu = stochastic_flow(game, &policy);
        let table = RewardTable::new(game, &mu)?;
        for (acc, q) in y.iter_mut().zip(q_values(game, &table, &policy)) {
            acc.iter_mut().zip(q).for_each(|(a, v)| *a += v);
        }
        policy = StochasticPolicy::from_rows(softmax_rows(&y, na, rate), na);
        let point = CurvePoint {
            iteration: k,
            exploitability: policy_exploitability(game, &policy)?.value,
        };
        observe(&point);
        curve.push(point);
    }
    Ok(BaselineRun {
        algorithm: Baseline::MirrorDescent { learning_rate: rate },
        iterations,
        curve,
        history: None,
        policy: Some(policy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{biased_rps, crowd_chain, dominant_action};
    use crate::mfg::{mixture_flow, MixedPolicy, PolicySet};

    #[test]
    fn fp_on_rps() {
        let run = fictitious_play(&biased_rps(), 200).unwrap();
        assert_eq!(run.curve.len(), 200);
        assert!(run.final_exploitability().unwrap() <= 0.05);
    }

    #[test]
    fn fp_single_iteration() {
        let run = fictitious_play(&biased_rps(), 1).unwrap();
        assert_eq!(run.curve.len(), 1);
        assert_eq!(run.history.unwrap().len(), 2);
    }

    #[test]
    fn fp_dominant_bound() {
        let game = dominant_action();
        let run = fictitious_play(&game, 20).unwrap();
        for p in &run.curve {
            assert!(p.exploitability <= game.reward_range() / (p.iteration + 1) as f64 + 1e-12);
        }
    }

    #[test]
    fn fp_average_is_history_mixture() {
        let game = crowd_chain(4, 6, 1.0).unwrap();
        let run = fictitious_play(&game, 12).unwrap();
        let history = run.history.unwrap();
        let mut set = PolicySet::new();
        let mut counts = Vec::new();
        for p in &history {
            let (i, fresh) = set.insert(&game, p.clone()).unwrap();
            if fresh {
                counts.push(0.0);
            }
            counts[i] += 1.0;
        }
        let nu = MixedPolicy::from_unnormalized(counts).unwrap();
        let mixed = mixture_flow(&set, &nu).unwrap();
        let table = RewardTable::new(&game, &mixed).unwrap();
        let gap = best_response_to_table(&game, &table).unwrap().value - table.evaluate(&mixed);
        assert!((gap - run.curve.last().unwrap().exploitability).abs() < 1e-10);
        assert!(mixed.conservation_error() < 1e-10);
    }

    #[test]
    fn omd_tiny_rate_stays_uniform() {
        let run = online_mirror_descent(&biased_rps(), 5, 1e-12).unwrap();
        let first = run.curve[0].exploitability;
        assert!(run.curve.iter().all(|p| (p.exploitability - first).abs() < 1e-9));
    }

    #[test]
    fn omd_dominant_converges() {
        let run = online_mirror_descent(&dominant_action(), 50, 1.0).unwrap();
        let tail: Vec<f64> = run.curve.iter().map(|p| p.exploitability).collect();
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*tail.last().unwrap() < 1e-6);
    }

    #[test]
    fn omd_rejects_bad_rate() {
        assert!(online_mirror_descent(&biased_rps(), 5, 0.0).is_err());
        assert!(fictitious_play(&biased_rps(), 0).is_err());
    }

    #[test]
    fn omd_rate_sweep_on_rps() {
        let runs: Vec<BaselineRun> = [0.01, 0.1, 1.0]
            .iter()
            .map(|&lr| online_mirror_descent(&biased_rps(), 500, lr).unwrap())
            .collect();
        let reached = runs
            .iter()
            .any(|r| r.curve.iter().any(|p| p.exploitability <= 0.05));
        assert!(reached);
        let finals: Vec<f64> = runs.iter().map(|r| r.final_exploitability().unwrap()).collect();
        let hi = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(hi / lo >= 2.0);
    }
}
