//! No-regret learners over the simplex of a restricted policy set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{l1_distance, normalize, uniform, Scalar};

/// Regret matching: play proportionally to positive cumulative regret,
/// uniformly when no regret is positive.
pub fn regret_matching_step<T: Scalar>(cumulative: &[T]) -> Result<Vec<T>> {
    if cumulative.is_empty() {
        return Err(Error::Parameter("regret matching over zero actions".into()));
    }
    if cumulative.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite cumulative regret".into()));
    }
    let mut w: Vec<T> = cumulative.iter().map(|r| r.max(T::zero())).collect();
    normalize(&mut w);
    Ok(w)
}

/// Exponential weights `w_i ∝ exp(eta * U_i)`, shifted by the maximum.
pub fn hedge_step<T: Scalar>(cumulative_payoffs: &[T], eta: T) -> Result<Vec<T>> {
    if cumulative_payoffs.is_empty() {
        return Err(Error::Parameter("hedge over zero actions".into()));
    }
    if !(eta > T::zero() && eta.is_finite()) {
        return Err(Error::Parameter(format!("hedge learning rate {eta} must be > 0")));
    }
    if cumulative_payoffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite cumulative payoff".into()));
    }
    let top = cumulative_payoffs
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let mut w: Vec<T> = cumulative_payoffs
        .iter()
        .map(|u| (eta * (*u - top)).exp())
        .collect();
    normalize(&mut w);
    Ok(w)
}

/// Stationary distribution `nu = nu Q` of a row-stochastic matrix.
///
/// A direct linear solve provides the starting point; lazy power
/// iteration `nu <- nu (Q + I) / 2` then drives the L1 residual
/// `||nu Q - nu||_1` below `tol`. Returns the distribution and its residual.
pub fn stationary_distribution<T: Scalar>(
    q: &[Vec<T>],
    start: Option<&[T]>,
    tol: T,
    max_iterations: usize,
) -> Result<(Vec<T>, T)> {
    let n = q.len();
    if n == 0 || q.iter().any(|row| row.len() != n) {
        return Err(Error::Parameter("stationary distribution needs a square matrix".into()));
    }
    let step = |nu: &[T]| -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for (i, row) in q.iter().enumerate() {
            if nu[i] == T::zero() {
                continue;
            }
            for (o, qij) in out.iter_mut().zip(row) {
                *o += nu[i] * *qij;
            }
        }
        out
    };
    let residual = |nu: &[T]| l1_distance(&step(nu), nu);

    let mut nu = match solve_stationary(q) {
        Some(v) => v,
        None => start
            .filter(|s| s.len() == n)
            .map(<[T]>::to_vec)
            .unwrap_or_else(|| uniform(n)),
    };
    let mut res = residual(&nu);
    let half = T::lit(0.5);
    let mut iterations = 0;
    while res >= tol {
        if iterations == max_iterations {
            return Err(Error::Numeric(format!(
                "stationary distribution not found after {max_iterations} iterations (residual {res})"
            )));
        }
        let next = step(&nu);
        nu = nu.iter().zip(&next).map(|(a, b)| (*a + *b) * half).collect();
        normalize(&mut nu);
        res = residual(&nu);
        iterations += 1;
    }
    Ok((nu, res))
}

/// Solves `(Q^T - I) nu = 0, sum nu = 1` by Gaussian elimination with
/// partial pivoting. `None` when the system is singular (several recurrent
/// classes) or the solution leaves the simplex.
fn solve_stationary<T: Scalar>(q: &[Vec<T>]) -> Option<Vec<T>> {
    let n = q.len();
    let mut a: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut row: Vec<T> = (0..n).map(|j| q[j][i]).collect();
            row[i] -= T::one();
            row.push(T::zero());
            row
        })
        .collect();
    a[n - 1] = vec![T::one(); n + 1];
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| {
            a[r][col]
                .abs()
                .partial_cmp(&a[s][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= T::eps() {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col && a[r][col] != T::zero() {
                let f = a[r][col];
                for c in col..=n {
                    let d = f * a[col][c];
                    a[r][c] -= d;
                }
            }
        }
    }
    let mut nu: Vec<T> = a.iter().map(|row| row[n]).collect();
    if nu.iter().any(|v| !v.is_finite() || *v < -T::lit(1e-6)) {
        return None;
    }
    nu.iter_mut().for_each(|v| *v = v.max(T::zero()));
    normalize(&mut nu);
    Some(nu)
}

/// An online learner over the simplex with full-information linear rewards.
pub trait Learner<T: Scalar>: Send {
    /// Distribution for the current round.
    fn play(&mut self) -> Result<Vec<T>>;
    /// Reward of every expert in the round just played.
    fn observe(&mut self, rewards: &[T]) -> Result<()>;
}

/// Regret matching learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretMatching<T> {
    cumulative: Vec<T>,
    last: Option<Vec<T>>,
}

impl<T: Scalar> RegretMatching<T> {
    pub fn new(n: usize) -> Self {
        RegretMatching {
            cumulative: vec![T::zero(); n],
            last: None,
        }
    }

    pub fn cumulative_regret(&self) -> &[T] {
        &self.cumulative
    }

    /// Current distribution without committing a round.
    pub fn strategy(&self) -> Result<Vec<T>> {
        regret_matching_step(&self.cumulative)
    }
}

impl<T: Scalar> Learner<T> for RegretMatching<T> {
    fn play(&mut self) -> Result<Vec<T>> {
        let s = self.strategy()?;
        self.last = Some(s.clone());
        Ok(s)
    }

    fn observe(&mut self, rewards: &[T]) -> Result<()> {
        let played = match self.last.take() {
            Some(p) => p,
            None => self.strategy()?,
        };
        check_len(rewards, self.cumulative.len())?;
        let expected: T = played.iter().zip(rewards).map(|(p, r)| *p * *r).sum();
        for (c, r) in self.cumulative.iter_mut().zip(rewards) {
            *c += *r - expected;
        }
        Ok(())
    }
}

/// Hedge (multiplicative weights) learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hedge<T> {
    cumulative: Vec<T>,
    eta: T,
}

impl<T: Scalar> Hedge<T> {
    pub fn new(n: usize, eta: T) -> Self {
        Hedge {
            cumulative: vec![T::zero(); n],
            eta,
        }
    }

    /// `sqrt(8 ln n / horizon)`, tuned for rewards in a unit range.
    pub fn default_rate(n: usize, horizon: usize) -> T {
        let n = n.max(2) as f64;
        T::lit((8.0 * n.ln() / horizon.max(1) as f64).sqrt())
    }
}

impl<T: Scalar> Learner<T> for Hedge<T> {
    fn play(&mut self) -> Result<Vec<T>> {
        hedge_step(&self.cumulative, self.eta)
    }

    fn observe(&mut self, rewards: &[T]) -> Result<()> {
        check_len(rewards, self.cumulative.len())?;
        self.cumulative
            .iter_mut()
            .zip(rewards)
            .for_each(|(c, r)| *c += *r);
        Ok(())
    }
}

/// Swap-regret learner built from one external learner per expert: expert
/// `i`'s learner proposes row `i` of a stochastic matrix `Q`, the played
/// distribution is stationary for `Q`, and learner `i` is charged the
/// reward vector scaled by the mass it was given.
#[derive(Clone, Debug)]
pub struct BlumMansour<T, L> {
    experts: Vec<L>,
    last: Option<Vec<T>>,
    last_residual: T,
}

/// Residual below which a stationary distribution is accepted.
pub fn stationarity_tol<T: Scalar>() -> T {
    T::eps() * T::lit(100.0)
}

pub const STATIONARY_MAX_ITERATIONS: usize = 100_000;

impl<T: Scalar, L: Learner<T>> BlumMansour<T, L> {
    pub fn new(experts: Vec<L>) -> Self {
        BlumMansour {
            experts,
            last: None,
            last_residual: T::zero(),
        }
    }

    /// `||nu Q - nu||_1` of the last played distribution.
    pub fn last_residual(&self) -> T {
        self.last_residual
    }
}

impl<T: Scalar> BlumMansour<T, RegretMatching<T>> {
    pub fn regret_matching(n: usize) -> Self {
        Self::new((0..n).map(|_| RegretMatching::new(n)).collect())
    }
}

impl<T: Scalar, L: Learner<T>> Learner<T> for BlumMansour<T, L> {
    fn play(&mut self) -> Result<Vec<T>> {
        let q = self
            .experts
            .iter_mut()
            .map(|e| e.play())
            .collect::<Result<Vec<_>>>()?;
        let (nu, res) = stationary_distribution(
            &q,
            self.last.as_deref(),
            stationarity_tol(),
            STATIONARY_MAX_ITERATIONS,
        )?;
        self.last_residual = res;
        self.last = Some(nu.clone());
        Ok(nu)
    }

    fn observe(&mut self, rewards: &[T]) -> Result<()> {
        check_len(rewards, self.experts.len())?;
        let nu = match &self.last {
            Some(nu) => nu.clone(),
            None => return Err(Error::Parameter("observe called before play".into())),
        };
        for (expert, w) in self.experts.iter_mut().zip(&nu) {
            let scaled: Vec<T> = rewards.iter().map(|r| *r * *w).collect();
            expert.observe(&scaled)?;
        }
        Ok(())
    }
}

/// One Blum–Mansour round: feed the previous round's scaled rewards to the
/// per-expert learners, then return the next stationary distribution.
pub fn internal_regret_step<T: Scalar, L: Learner<T>>(
    state: &mut BlumMansour<T, L>,
    last_payoffs: Option<&[T]>,
) -> Result<Vec<T>> {
    if let Some(r) = last_payoffs {
        state.observe(r)?;
    }
    state.play()
}

fn check_len<T>(rewards: &[T], n: usize) -> Result<()> {
    if rewards.len() != n {
        return Err(Error::Parameter(format!(
            "reward vector has {} entries, learner has {n}",
            rewards.len()
        )));
    }
    Ok(())
}
