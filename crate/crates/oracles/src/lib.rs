//! Brute-force reference computations for small instances: policy
//! enumeration, exploitability by exhaustive search, and zero-sum game
//! values by vertex enumeration plus grid search.
//!
//! Nothing here calls into the solvers being checked. Only the game
//! definition (dynamics and rewards) is shared.

use mfpsro::mfg::{DeterministicPolicy, Horizon, MeanFieldGame, Population};
use rand::Rng;
use thiserror::Error;

pub const MAX_STATES: usize = 4;
pub const MAX_ACTIONS: usize = 4;
pub const MAX_STEPS: usize = 3;
pub const MAX_POLICIES: usize = 10_000;
pub const MAX_MATRIX_DIM: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    Guard(String),
    #[error("invalid oracle input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// A finite-horizon game small enough to enumerate.
#[derive(Clone, Copy, Debug)]
pub struct EnumeratedGame<'a> {
    game: &'a MeanFieldGame,
    steps: usize,
    policies: usize,
}

impl<'a> EnumeratedGame<'a> {
    pub fn new(game: &'a MeanFieldGame) -> Result<Self> {
        let steps = match game.horizon() {
            Horizon::Finite { steps } => steps,
            Horizon::Discounted { .. } => {
                return Err(OracleError::Guard("discounted games are not enumerated".into()))
            }
        };
        let (nx, na) = (game.num_states(), game.num_actions());
        if nx > MAX_STATES || na > MAX_ACTIONS || steps > MAX_STEPS {
            return Err(OracleError::Guard(format!(
                "{nx} states, {na} actions, {steps} steps exceeds {MAX_STATES}/{MAX_ACTIONS}/{MAX_STEPS}"
            )));
        }
        let cells = (nx * steps) as u32;
        let policies = (na as u64).checked_pow(cells).unwrap_or(u64::MAX);
        if policies > MAX_POLICIES as u64 {
            return Err(OracleError::Guard(format!("{policies} policies exceeds {MAX_POLICIES}")));
        }
        Ok(EnumeratedGame {
            game,
            steps,
            policies: policies as usize,
        })
    }

    pub fn game(&self) -> &'a MeanFieldGame {
        self.game
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn policy_count(&self) -> usize {
        self.policies
    }
}

/// Every time-indexed deterministic policy, in lexicographic order of the
/// flattened `[step][state]` table.
pub fn enumerate_policies(game: &MeanFieldGame) -> Result<Vec<DeterministicPolicy>> {
    let e = EnumeratedGame::new(game)?;
    let (nx, na) = (game.num_states(), game.num_actions());
    let cells = e.steps * nx;
    let mut out = Vec::with_capacity(e.policies);
    for mut code in 0..e.policies {
        let mut flat = vec![0usize; cells];
        for slot in flat.iter_mut().rev() {
            *slot = code % na;
            code /= na;
        }
        out.push(DeterministicPolicy::TimeIndexed(
            flat.chunks(nx).map(<[usize]>::to_vec).collect(),
        ));
    }
    Ok(out)
}

fn table_of(policy: &DeterministicPolicy, steps: usize, nx: usize, na: usize) -> Result<Vec<Vec<usize>>> {
    let table = match policy {
        DeterministicPolicy::TimeIndexed(t) => t.clone(),
        DeterministicPolicy::Stationary(t) => vec![t.clone(); steps],
    };
    let ok = table.len() == steps && table.iter().all(|row| row.len() == nx && row.iter().all(|&a| a < na));
    if ok {
        Ok(table)
    } else {
        Err(OracleError::Input("policy does not fit the game".into()))
    }
}

/// Per-step `(state distribution, state-action distribution)` of one policy.
fn rollout(game: &MeanFieldGame, table: &[Vec<usize>]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (nx, na) = (game.num_states(), game.num_actions());
    let mut m = game.mu0().to_vec();
    let mut out = Vec::with_capacity(table.len());
    for row in table {
        let mut sa = vec![0.0; nx * na];
        let mut next = vec![0.0; nx];
        for x in 0..nx {
            sa[x * na + row[x]] += m[x];
            next[game.transition(x, row[x])] += m[x];
        }
        out.push((std::mem::replace(&mut m, next), sa));
    }
    out
}

/// Population of a `nu`-mixture over `policies`, step by step.
fn population(
    game: &MeanFieldGame,
    steps: usize,
    policies: &[DeterministicPolicy],
    nu: &[f64],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if policies.len() != nu.len() || policies.is_empty() {
        return Err(OracleError::Input("mixture and policy list differ in length".into()));
    }
    let (nx, na) = (game.num_states(), game.num_actions());
    let mut pop = vec![(vec![0.0; nx], vec![0.0; nx * na]); steps];
    for (p, &w) in policies.iter().zip(nu) {
        for (acc, (m, sa)) in pop.iter_mut().zip(rollout(game, &table_of(p, steps, nx, na)?)) {
            acc.0.iter_mut().zip(&m).for_each(|(a, v)| *a += w * v);
            acc.1.iter_mut().zip(&sa).for_each(|(a, v)| *a += w * v);
        }
    }
    Ok(pop)
}

/// Payoff of a player following `table` against the step populations.
fn value(game: &MeanFieldGame, table: &[Vec<usize>], pop: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let na = game.num_actions();
    let mut own = game.mu0().to_vec();
    let mut sum = 0.0;
    for (step, (m, sa)) in pop.iter().enumerate() {
        let p = Population::new(m, sa, na);
        let mut next = vec![0.0; own.len()];
        for (x, &mass) in own.iter().enumerate() {
            let a = table[step][x];
            if mass != 0.0 {
                sum += mass * game.reward(x, a, &p);
            }
            next[game.transition(x, a)] += mass;
        }
        own = next;
    }
    sum
}

/// `J(pi, mu(nu))` by direct rollout.
pub fn brute_payoff(
    game: &MeanFieldGame,
    policy: &DeterministicPolicy,
    policies: &[DeterministicPolicy],
    nu: &[f64],
) -> Result<f64> {
    let e = EnumeratedGame::new(game)?;
    let pop = population(game, e.steps, policies, nu)?;
    let (nx, na) = (game.num_states(), game.num_actions());
    Ok(value(game, &table_of(policy, e.steps, nx, na)?, &pop))
}

/// `max_pi J(pi, mu(nu))` over every enumerated policy.
pub fn brute_best_value(game: &MeanFieldGame, policies: &[DeterministicPolicy], nu: &[f64]) -> Result<f64> {
    let e = EnumeratedGame::new(game)?;
    let pop = population(game, e.steps, policies, nu)?;
    let (nx, na) = (game.num_states(), game.num_actions());
    let mut best = f64::NEG_INFINITY;
    for p in enumerate_policies(game)? {
        best = best.max(value(game, &table_of(&p, e.steps, nx, na)?, &pop));
    }
    Ok(best)
}

/// `max_pi J(pi, mu(nu)) - sum_i nu_i J(pi_i, mu(nu))`.
pub fn brute_exploitability(game: &MeanFieldGame, policies: &[DeterministicPolicy], nu: &[f64]) -> Result<f64> {
    let e = EnumeratedGame::new(game)?;
    let pop = population(game, e.steps, policies, nu)?;
    let (nx, na) = (game.num_states(), game.num_actions());
    let mut on_mixture = 0.0;
    for (p, &w) in policies.iter().zip(nu) {
        on_mixture += w * value(game, &table_of(p, e.steps, nx, na)?, &pop);
    }
    Ok(brute_best_value(game, policies, nu)? - on_mixture)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// `max_c sum_r p_r m[r][c]`.
fn worst_column(m: &[Vec<f64>], p: &[f64]) -> f64 {
    (0..m[0].len())
        .map(|c| p.iter().zip(m).map(|(w, row)| w * row[c]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..n).filter(|i| s & (1 << i) != 0).collect())
        .collect()
}

/// Candidate optima at vertices of `{(p, t): p in simplex, p m <= t}`:
/// a row support `S` and as many tight columns, solved as a square system.
fn vertex_value(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let (rows, cols) = (m.len(), m[0].len());
    let mut best = (f64::INFINITY, vec![1.0 / rows as f64; rows]);
    for k in 1..=rows.min(cols) {
        for support in subsets(rows, k) {
            for tight in subsets(cols, k) {
                // Unknowns p_S and t: sum_{r in S} p_r m[r][c] - t = 0 for c in
                // tight, sum p_S = 1.
                let mut a = Vec::with_capacity(k + 1);
                let mut b = Vec::with_capacity(k + 1);
                for &c in &tight {
                    let mut row: Vec<f64> = support.iter().map(|&r| m[r][c]).collect();
                    row.push(-1.0);
                    a.push(row);
                    b.push(0.0);
                }
                let mut sum = vec![1.0; k];
                sum.push(0.0);
                a.push(sum);
                b.push(1.0);
                let Some(x) = solve_linear(a, b) else { continue };
                if x[..k].iter().any(|&v| v < -1e-12) {
                    continue;
                }
                let mut p = vec![0.0; rows];
                for (&r, &v) in support.iter().zip(&x) {
                    p[r] = v.max(0.0);
                }
                let z: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= z);
                let v = worst_column(m, &p);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
    }
    best
}

/// Grid points of the simplex with denominator `den`.
fn grid(rows: usize, den: usize, visit: &mut impl FnMut(&[f64])) {
    fn rec(prefix: &mut Vec<usize>, left: usize, rows: usize, den: usize, visit: &mut impl FnMut(&[f64])) {
        if prefix.len() + 1 == rows {
            prefix.push(left);
            let p: Vec<f64> = prefix.iter().map(|&c| c as f64 / den as f64).collect();
            visit(&p);
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(prefix, left - c, rows, den, visit);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(rows), den, rows, den, visit);
}

/// Largest denominator whose simplex grid stays under ~2e5 points.
fn grid_denominator(rows: usize) -> usize {
    let count = |den: usize| -> f64 {
        // C(den + rows - 1, rows - 1)
        (1..rows).fold(1.0, |acc, i| acc * (den + i) as f64 / i as f64)
    };
    let mut den = 1;
    while den < 1000 && count(den + 1) <= 2e5 {
        den += 1;
    }
    den
}

/// Pairwise mass transfers with a shrinking step, down to 1e-6.
fn refine(m: &[Vec<f64>], mut p: Vec<f64>) -> (f64, Vec<f64>) {
    let rows = p.len();
    let mut v = worst_column(m, &p);
    let mut step: f64 = 1e-2;
    while step >= 1e-6 {
        let mut improved = false;
        for i in 0..rows {
            for j in 0..rows {
                if i == j || p[i] <= 0.0 {
                    continue;
                }
                let d = step.min(p[i]);
                p[i] -= d;
                p[j] += d;
                let w = worst_column(m, &p);
                if w < v - 1e-15 {
                    v = w;
                    improved = true;
                } else {
                    p[i] += d;
                    p[j] -= d;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (v, p)
}

/// `min_{p in simplex} max_c (p m)_c` for matrices up to 6x6: the better of
/// exact vertex enumeration and a refined grid search.
pub fn brute_minimax(m: &[Vec<f64>]) -> Result<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(OracleError::Input("matrix must be non-empty and rectangular".into()));
    }
    if rows > MAX_MATRIX_DIM || cols > MAX_MATRIX_DIM {
        return Err(OracleError::Guard(format!("{rows}x{cols} exceeds {MAX_MATRIX_DIM}x{MAX_MATRIX_DIM}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(OracleError::Input("matrix has non-finite entries".into()));
    }
    let (vertex, _) = vertex_value(m);
    let mut best = (f64::INFINITY, vec![0.0; rows]);
    grid(rows, grid_denominator(rows), &mut |p| {
        let v = worst_column(m, p);
        if v < best.0 {
            best = (v, p.to_vec());
        }
    });
    let (refined, _) = refine(m, best.1);
    Ok(vertex.min(refined))
}

/// Random game within the enumeration bounds: arbitrary transitions, a
/// random initial distribution, and rewards mixing a fixed table with
/// terms linear in the state and action distributions and a quadratic
/// crowding term.
pub fn random_small_game<R: Rng + ?Sized>(rng: &mut R) -> MeanFieldGame {
    let nx = rng.random_range(1..=3);
    let na = rng.random_range(2..=3);
    let steps = rng.random_range(1..=2);
    random_game(rng, nx, na, steps)
}

pub fn random_game<R: Rng + ?Sized>(rng: &mut R, nx: usize, na: usize, steps: usize) -> MeanFieldGame {
    let next: Vec<usize> = (0..nx * na).map(|_| rng.random_range(0..nx)).collect();
    let mut mu0: Vec<f64> = (0..nx).map(|_| rng.random_range(0.1..1.0)).collect();
    let z: f64 = mu0.iter().sum();
    mu0.iter_mut().for_each(|v| *v /= z);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let base = draw(nx * na);
    let by_state = draw(nx * na * nx);
    let by_action = draw(nx * na * na);
    let crowd = draw(nx * na);
    MeanFieldGame::builder("random_small", nx, na)
        .transition(move |x, a| next[x * na + a])
        .reward(move |x, a, pop| {
            let k = x * na + a;
            let s: f64 = (0..nx).map(|y| by_state[k * nx + y] * pop.state(y)).sum();
            let b: f64 = (0..na).map(|c| by_action[k * na + c] * pop.action(c)).sum();
            base[k] + s + b + crowd[k] * pop.state_action(x, a) * pop.state(x)
        })
        .mu0(mu0)
        .horizon(Horizon::Finite { steps })
        .reward_bound(4.0)
        .build()
        .expect("random game parameters are valid")
}
