use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::lp::{row_value, solve_minimax, MinimaxSolution};
use crate::error::{Error, Result};
use crate::mfg::MixedPolicy;

/// Per-iterate regrets of a regret-minimisation run over a fixed policy set.
///
/// `external[t][i] = J(pi_i, mu(nu_t)) - J(nu_t, mu(nu_t))` and
/// `internal[t][i][j] = nu_t(i) (J(pi_j, mu(nu_t)) - J(pi_i, mu(nu_t)))`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub iterates: Vec<MixedPolicy>,
    /// Payoff of each set member against `mu(nu_t)`, as observed.
    pub payoffs: Vec<Vec<f64>>,
    pub external: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal: Option<Vec<Vec<Vec<f64>>>>,
}

impl RegretTrace {
    pub fn new(track_internal: bool) -> Self {
        RegretTrace {
            internal: track_internal.then(Vec::new),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// Records iterate `nu` together with the payoff of every set member
    /// against the population it induces.
    pub fn push(&mut self, nu: MixedPolicy, payoffs: Vec<f64>) -> Result<()> {
        if nu.len() != payoffs.len() {
            return Err(Error::Parameter(format!(
                "iterate over {} policies but {} payoffs",
                nu.len(),
                payoffs.len()
            )));
        }
        if let Some(first) = self.payoffs.first() {
            if first.len() != payoffs.len() {
                return Err(Error::Parameter("trace rows must share one policy set".into()));
            }
        }
        let on_device: f64 = nu.weights().iter().zip(&payoffs).map(|(w, j)| w * j).sum();
        self.external.push(payoffs.iter().map(|j| j - on_device).collect());
        if let Some(internal) = &mut self.internal {
            let w = nu.weights();
            internal.push(
                (0..payoffs.len())
                    .map(|i| payoffs.iter().map(|jj| w[i] * (jj - payoffs[i])).collect())
                    .collect(),
            );
        }
        self.iterates.push(nu);
        self.payoffs.push(payoffs);
        Ok(())
    }

    /// Flattened `T x n^2` swap-regret matrix.
    pub fn internal_matrix(&self) -> Option<Vec<Vec<f64>>> {
        self.internal
            .as_ref()
            .map(|rows| rows.iter().map(|r| r.concat()).collect())
    }

    /// `max_i (1/T) sum_t external[t][i]`.
    pub fn uniform_external_regret(&self) -> Option<f64> {
        uniform_value(&self.external)
    }

    /// `max_{i,j} (1/T) sum_t internal[t][i][j]`.
    pub fn uniform_internal_regret(&self) -> Option<f64> {
        uniform_value(&self.internal_matrix()?)
    }
}

fn uniform_value(matrix: &[Vec<f64>]) -> Option<f64> {
    if matrix.is_empty() {
        return None;
    }
    let w = vec![1.0 / matrix.len() as f64; matrix.len()];
    Some(row_value(matrix, &w))
}

/// Optimal temporal weights for coarse-correlated regret.
pub fn compress_cce(trace: &RegretTrace) -> Result<MinimaxSolution<f64>> {
    if trace.is_empty() {
        return Err(Error::Parameter("cannot compress an empty trace".into()));
    }
    solve_minimax(&trace.external)
}

/// Optimal temporal weights for swap regret.
pub fn compress_ce(trace: &RegretTrace) -> Result<MinimaxSolution<f64>> {
    if trace.is_empty() {
        return Err(Error::Parameter("cannot compress an empty trace".into()));
    }
    let matrix = trace
        .internal_matrix()
        .ok_or_else(|| Error::Parameter("trace has no internal regrets".into()))?;
    solve_minimax(&matrix)
}

/// One draw of the noisy-compression experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyCompressionSample {
    pub seed: u64,
    /// True value of the noisy optimum minus the clean optimum.
    pub delta: f64,
    /// `4 * max |eps|` for this draw.
    pub bound: f64,
}

/// Solves the compression LP on `matrix` and on copies perturbed entrywise
/// by `N(0, sigma^2)` noise, measuring the loss in true value.
pub fn noisy_compression_gap(
    matrix: &[Vec<f64>],
    sigma: f64,
    seeds: &[u64],
) -> Result<Vec<NoisyCompressionSample>> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::Parameter(format!("noise scale {sigma}: {e}")))?;
    let clean = solve_minimax(matrix)?;
    seeds
        .iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut largest = 0.0f64;
            let noisy: Vec<Vec<f64>> = matrix
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|v| {
                            let e = normal.sample(&mut rng);
                            largest = largest.max(e.abs());
                            v + e
                        })
                        .collect()
                })
                .collect();
            let perturbed = solve_minimax(&noisy)?;
            Ok(NoisyCompressionSample {
                seed,
                delta: row_value(matrix, &perturbed.rho) - clean.value,
                bound: 4.0 * largest,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_from(rows: &[(Vec<f64>, Vec<f64>)]) -> RegretTrace {
        let mut t = RegretTrace::new(true);
        for (nu, j) in rows {
            t.push(MixedPolicy::new(nu.clone()).unwrap(), j.clone()).unwrap();
        }
        t
    }

    #[test]
    fn push_computes_both_regrets() {
        let t = trace_from(&[(vec![0.5, 0.5], vec![1.0, 3.0])]);
        assert_eq!(t.external[0], vec![-1.0, 1.0]);
        let internal = t.internal.as_ref().unwrap();
        assert_eq!(internal[0], vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn single_iterate_compression() {
        let t = trace_from(&[(vec![0.25, 0.75], vec![2.0, -1.0])]);
        let s = compress_cce(&t).unwrap();
        assert_eq!(s.rho, vec![1.0]);
        let top = t.external[0].iter().cloned().fold(f64::MIN, f64::max);
        assert!((s.value - top).abs() < 1e-12);
        let s = compress_ce(&t).unwrap();
        assert!((s.value - 0.75 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_row_gives_nonpositive_value() {
        let t = trace_from(&[
            (vec![1.0, 0.0], vec![0.0, 1.0]),
            (vec![0.0, 1.0], vec![0.0, 1.0]),
        ]);
        assert!(compress_cce(&t).unwrap().value <= 1e-12);
    }

    #[test]
    fn dominant_policy_has_no_swap_regret() {
        let t = trace_from(&[
            (vec![1.0, 0.0, 0.0], vec![1.0, 0.5, 0.0]),
            (vec![1.0, 0.0, 0.0], vec![0.8, 0.1, 0.2]),
        ]);
        assert!(compress_ce(&t).unwrap().value <= 1e-12);
    }

    #[test]
    fn empty_trace_is_rejected() {
        let t = RegretTrace::new(false);
        assert!(matches!(compress_cce(&t), Err(Error::Parameter(_))));
        assert!(matches!(compress_ce(&t), Err(Error::Parameter(_))));
        let t = trace_from(&[(vec![1.0], vec![0.0])]);
        let mut t2 = t.clone();
        t2.internal = None;
        assert!(compress_ce(&t2).is_err());
    }

    #[test]
    fn zero_noise_has_zero_gap() {
        let m = vec![vec![0.3, -0.1], vec![-0.2, 0.4], vec![0.1, 0.1]];
        for s in noisy_compression_gap(&m, 0.0, &[1, 2, 3]).unwrap() {
            assert_eq!(s.delta, 0.0);
            assert_eq!(s.bound, 0.0);
        }
        for s in noisy_compression_gap(&[vec![0.7]], 0.5, &[4, 5]).unwrap() {
            assert_eq!(s.delta, 0.0);
        }
    }

    #[test]
    fn trace_round_trips_through_json() {
        let t = trace_from(&[(vec![0.5, 0.5], vec![1.0, 3.0])]);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<RegretTrace>(&s).unwrap(), t);
    }
}
