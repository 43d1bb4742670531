use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{payoff, MeanFieldGame, Population, PolicySet};
use crate::nash::{minimize_on_simplex, SimplexInit, SimplexSearchConfig};
use crate::regret::solve_minimax;

/// Uniformly random point of the `n`-simplex.
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Two state-action pairs whose reward difference is not affine in the population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffAffineWitness {
    pub first: (usize, usize),
    pub second: (usize, usize),
    /// `|dr(mid) - (dr(mu1) + dr(mu2)) / 2|`.
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffAffineReport {
    pub diff_affine: bool,
    pub witness: Option<DiffAffineWitness>,
}

/// Randomised midpoint test of `r(x, a, mu) - r(x', a', mu)` being affine in
/// the joint state-action population `mu`.
pub fn check_diff_affine<R: Rng + ?Sized>(
    game: &MeanFieldGame,
    trials: usize,
    tol: f64,
    rng: &mut R,
) -> Result<DiffAffineReport> {
    if trials == 0 {
        return Err(Error::Parameter("diff-affinity check needs at least one trial".into()));
    }
    let (nx, na) = (game.num_states(), game.num_actions());
    let marginal = |sa: &[f64]| -> Vec<f64> { (0..nx).map(|x| sa[x * na..(x + 1) * na].iter().sum()).collect() };
    let mut worst: Option<DiffAffineWitness> = None;
    for _ in 0..trials {
        let sa1 = random_simplex(nx * na, rng);
        let sa2 = random_simplex(nx * na, rng);
        let mid: Vec<f64> = sa1.iter().zip(&sa2).map(|(a, b)| 0.5 * (a + b)).collect();
        let (s1, s2, sm) = (marginal(&sa1), marginal(&sa2), marginal(&mid));
        let p1 = Population::new(&s1, &sa1, na);
        let p2 = Population::new(&s2, &sa2, na);
        let pm = Population::new(&sm, &mid, na);
        let first = (rng.random_range(0..nx), rng.random_range(0..na));
        let second = (rng.random_range(0..nx), rng.random_range(0..na));
        let dr = |p: &Population<'_>| game.reward(first.0, first.1, p) - game.reward(second.0, second.1, p);
        let discrepancy = (dr(&pm) - 0.5 * (dr(&p1) + dr(&p2))).abs();
        if discrepancy > tol && worst.as_ref().is_none_or(|w| discrepancy > w.discrepancy) {
            worst = Some(DiffAffineWitness { first, second, discrepancy });
        }
    }
    Ok(DiffAffineReport {
        diff_affine: worst.is_none(),
        witness: worst,
    })
}

/// `M[i][j] = J(pi_i, mu^{pi_j})`.
pub fn meta_game_matrix(game: &MeanFieldGame, set: &PolicySet) -> Result<Vec<Vec<f64>>> {
    if set.is_empty() {
        return Err(Error::Parameter("meta-game of an empty policy set".into()));
    }
    (0..set.len())
        .map(|i| (0..set.len()).map(|j| payoff(game, set.policy(i), set.flow(j))).collect())
        .collect()
}

/// Largest gain of a pure deviation against `nu` in the symmetric game
/// where the row player earns `M[i][j]`.
pub fn symmetric_regret(matrix: &[Vec<f64>], nu: &[f64]) -> f64 {
    let m_nu: Vec<f64> = matrix
        .iter()
        .map(|row| row.iter().zip(nu).map(|(m, w)| m * w).sum())
        .collect();
    let value: f64 = nu.iter().zip(&m_nu).map(|(w, v)| w * v).sum();
    m_nu.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)) - value
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetricNashMethod {
    Minimax,
    SupportEnumeration,
    Search,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricNash {
    pub weights: Vec<f64>,
    pub regret: f64,
    pub method: SymmetricNashMethod,
}

const SYMMETRIC_TOL: f64 = 1e-9;
const SUPPORT_ENUMERATION_LIMIT: usize = 10;

/// Symmetric Nash equilibrium of the two-player game with payoffs `M`, `M^T`.
///
/// Tries the minimax solution first (exact whenever the game is zero-sum
/// like), then support enumeration for small games, then simplex search
/// seeded from the minimax point.
pub fn symmetric_nash_of_meta_game(matrix: &[Vec<f64>]) -> Result<SymmetricNash> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::Parameter("meta-game matrix must be square and non-empty".into()));
    }
    let transposed: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| matrix[i][j]).collect()).collect();
    let lp = solve_minimax(&transposed)?;
    let regret = symmetric_regret(matrix, &lp.rho);
    if regret <= SYMMETRIC_TOL {
        return Ok(SymmetricNash { weights: lp.rho, regret, method: SymmetricNashMethod::Minimax });
    }
    if n <= SUPPORT_ENUMERATION_LIMIT {
        if let Some(weights) = support_enumeration(matrix) {
            let regret = symmetric_regret(matrix, &weights);
            return Ok(SymmetricNash { weights, regret, method: SymmetricNashMethod::SupportEnumeration });
        }
    }
    let config = SimplexSearchConfig {
        init: SimplexInit::WarmStart(lp.rho),
        tolerance: SYMMETRIC_TOL,
        ..SimplexSearchConfig::default()
    };
    let found = minimize_on_simplex(n, |w| Ok(symmetric_regret(matrix, w)), &config)?;
    Ok(SymmetricNash { weights: found.weights, regret: found.value, method: SymmetricNashMethod::Search })
}

/// Equalising mixtures on every support, smallest supports first.
fn support_enumeration(matrix: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = matrix.len();
    let mut supports: Vec<u32> = (1u32..(1 << n)).collect();
    supports.sort_by_key(|s| (s.count_ones(), *s));
    for mask in supports {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        // Unknowns: nu over the support, then the common value v.
        let mut a = vec![vec![0.0; k + 2]; k + 1];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[r][c] = matrix[i][j];
            }
            a[r][k] = -1.0;
        }
        a[k][..k].iter_mut().for_each(|v| *v = 1.0);
        a[k][k + 1] = 1.0;
        let Some(sol) = gauss_solve(a) else { continue };
        if sol[..k].iter().any(|w| *w < -SYMMETRIC_TOL) {
            continue;
        }
        let mut nu = vec![0.0; n];
        for (c, &i) in idx.iter().enumerate() {
            nu[i] = sol[c].max(0.0);
        }
        let s: f64 = nu.iter().sum();
        nu.iter_mut().for_each(|v| *v /= s);
        if symmetric_regret(matrix, &nu) <= SYMMETRIC_TOL {
            return Some(nu);
        }
    }
    None
}

/// Solves the augmented square system `a`, or `None` when singular.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}
