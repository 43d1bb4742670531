//! Exact minimax over temporal weights:
//!
//! ```text
//! min_rho max_k  sum_t rho_t M[t][k]   s.t. rho >= 0, sum rho = 1
//! ```
//!
//! i.e. the row player's optimal strategy in the zero-sum game where the
//! row player pays `M`. Solved by a dense primal simplex with Bland's rule
//! on the standard reformulation: shift `M` to be positive, substitute
//! `x = rho / v` and maximise `sum x` subject to `M'^T x <= 1, x >= 0`.
//! The slack basis is feasible, so no phase one is needed, and the dual
//! (the column player's strategy) is read off the slack reduced costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{normalize, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSolution<T> {
    /// Optimal weights over rows.
    pub rho: Vec<T>,
    /// `max_k rho^T M[., k]`.
    pub value: T,
    /// Columns attaining the max.
    pub active_columns: Vec<usize>,
    /// Optimal column strategy from the dual.
    pub column_strategy: Vec<T>,
    /// `min_t (M q)_t` for the dual strategy `q`; equals `value` at optimality.
    pub dual_value: T,
    pub pivots: usize,
}

impl<T: Scalar> MinimaxSolution<T> {
    /// Rows with positive weight.
    pub fn support(&self) -> Vec<usize> {
        self.rho
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn duality_gap(&self) -> T {
        (self.value - self.dual_value).abs()
    }
}

/// `max_k rho^T M[., k]`.
pub fn row_value<T: Scalar>(matrix: &[Vec<T>], rho: &[T]) -> T {
    let k = matrix.first().map_or(0, Vec::len);
    (0..k)
        .map(|c| rho.iter().zip(matrix).map(|(w, row)| *w * row[c]).sum::<T>())
        .fold(T::neg_infinity(), T::max)
}

fn validate<T: Scalar>(matrix: &[Vec<T>]) -> Result<usize> {
    let cols = matrix.first().map_or(0, Vec::len);
    if matrix.is_empty() || cols == 0 {
        return Err(Error::Parameter("minimax over an empty matrix".into()));
    }
    if matrix.iter().any(|r| r.len() != cols) {
        return Err(Error::Parameter("ragged minimax matrix".into()));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in minimax matrix".into()));
    }
    Ok(cols)
}

/// Solves the minimax problem exactly.
pub fn solve_minimax<T: Scalar>(matrix: &[Vec<T>]) -> Result<MinimaxSolution<T>> {
    let k = validate(matrix)?;
    let t = matrix.len();
    let eps = T::eps();

    let lo = matrix.iter().flatten().copied().fold(T::infinity(), T::min);
    let hi = matrix.iter().flatten().copied().fold(T::neg_infinity(), T::max);
    let scale = (hi - lo).max(T::one());
    // Entries of the shifted, scaled matrix lie in [1, 2].
    let shifted = |r: usize, c: usize| (matrix[r][c] - lo) / scale + T::one();

    // Tableau: k constraint rows over t structural + k slack columns.
    let width = t + k;
    let mut a = vec![vec![T::zero(); width]; k];
    for (c, row) in a.iter_mut().enumerate() {
        for (r, cell) in row.iter_mut().enumerate().take(t) {
            *cell = shifted(r, c);
        }
        row[t + c] = T::one();
    }
    let mut rhs = vec![T::one(); k];
    let mut basis: Vec<usize> = (t..width).collect();
    let mut reduced = vec![T::zero(); width];
    reduced[..t].iter_mut().for_each(|v| *v = T::one());
    let mut objective = T::zero();

    let mut pivots = 0usize;
    loop {
        // Bland: lowest-index improving column.
        let Some(enter) = reduced.iter().position(|v| *v > eps) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = T::infinity();
        for r in 0..k {
            let coef = a[r][enter];
            if coef > eps {
                let ratio = rhs[r] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - eps
                            || ((ratio - best_ratio).abs() <= eps && basis[r] < basis[l])
                    }
                };
                if better {
                    leave = Some(r);
                    best_ratio = ratio;
                }
            }
        }
        let Some(row) = leave else {
            // Cannot happen with a positive matrix; kept as a hard failure.
            return Err(Error::Numeric("minimax LP reported unbounded".into()));
        };
        pivot(&mut a, &mut rhs, &mut reduced, &mut objective, row, enter);
        basis[row] = enter;
        pivots += 1;
    }

    if objective <= T::zero() {
        return Err(Error::Numeric("minimax LP ended with a non-positive objective".into()));
    }
    let mut rho = vec![T::zero(); t];
    for (r, &b) in basis.iter().enumerate() {
        if b < t {
            rho[b] = rhs[r].max(T::zero());
        }
    }
    normalize(&mut rho);
    let mut column_strategy: Vec<T> = (0..k).map(|c| (-reduced[t + c]).max(T::zero())).collect();
    normalize(&mut column_strategy);

    let value = row_value(matrix, &rho);
    let dual_value = matrix
        .iter()
        .map(|row| row.iter().zip(&column_strategy).map(|(m, q)| *m * *q).sum::<T>())
        .fold(T::infinity(), T::min);
    let tie = T::lit(1e-9).max(eps) * scale;
    let active_columns = (0..k)
        .filter(|&c| {
            let v: T = rho.iter().zip(matrix).map(|(w, row)| *w * row[c]).sum();
            v >= value - tie
        })
        .collect();
    Ok(MinimaxSolution {
        rho,
        value,
        active_columns,
        column_strategy,
        dual_value,
        pivots,
    })
}

fn pivot<T: Scalar>(
    a: &mut [Vec<T>],
    rhs: &mut [T],
    reduced: &mut [T],
    objective: &mut T,
    row: usize,
    col: usize,
) {
    let p = a[row][col];
    a[row].iter_mut().for_each(|v| *v /= p);
    rhs[row] /= p;
    let pivot_row = a[row].clone();
    let pivot_rhs = rhs[row];
    for (r, line) in a.iter_mut().enumerate() {
        if r == row {
            continue;
        }
        let f = line[col];
        if f != T::zero() {
            line.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * *pv);
            line[col] = T::zero();
            rhs[r] -= f * pivot_rhs;
            if rhs[r] < T::zero() && rhs[r] > -T::eps() {
                rhs[r] = T::zero();
            }
        }
    }
    let f = reduced[col];
    reduced.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * *pv);
    reduced[col] = T::zero();
    *objective += f * pivot_rhs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_matrix() {
        let s = solve_minimax(&[vec![1.0f64]]).unwrap();
        assert_eq!(s.rho, vec![1.0]);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies() {
        let s = solve_minimax(&[vec![1.0f64, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((s.rho[0] - 0.5).abs() < 1e-12 && (s.rho[1] - 0.5).abs() < 1e-12);
        assert!((s.value - 0.5).abs() < 1e-12);
        assert!(s.duality_gap() < 1e-12);
        assert_eq!(s.active_columns, vec![0, 1]);
    }

    #[test]
    fn dominated_row() {
        let s = solve_minimax(&[vec![0.2f64, 0.3], vec![0.1, 0.05]]).unwrap();
        assert!((s.rho[1] - 1.0).abs() < 1e-12);
        assert!((s.value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_and_negative_entries() {
        let s = solve_minimax(&[vec![-3.0f64, -3.0], vec![-3.0, -3.0]]).unwrap();
        assert!((s.value + 3.0).abs() < 1e-12);
        let s = solve_minimax(&[vec![-1.0f64, 2.0], vec![3.0, -4.0]]).unwrap();
        // equalising weights: -p + 3(1-p) = 2p - 4(1-p) -> p = 0.7, value = 0.2
        assert!((s.rho[0] - 0.7).abs() < 1e-12);
        assert!((s.value - 0.2).abs() < 1e-12);
        assert!(s.duality_gap() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(solve_minimax::<f64>(&[]), Err(Error::Parameter(_))));
        assert!(matches!(solve_minimax(&[vec![f64::INFINITY]]), Err(Error::Numeric(_))));
        assert!(matches!(solve_minimax(&[vec![1.0], vec![1.0, 2.0]]), Err(Error::Parameter(_))));
    }

    #[test]
    fn single_precision() {
        let s = solve_minimax(&[vec![1.0f32, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((s.value - 0.5).abs() < 1e-5);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // many identical rows and columns stress Bland's anti-cycling rule
        let m: Vec<Vec<f64>> = (0..30).map(|i| (0..6).map(|j| ((i % 3 + j % 2) % 3) as f64).collect()).collect();
        let s = solve_minimax(&m).unwrap();
        assert!(s.duality_gap() < 1e-9);
    }
}
