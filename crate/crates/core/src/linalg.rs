//! Stationary distributions by Gaussian elimination over a [`Probability`]
//! field. Exact for rationals.

use crate::error::{Error, Result};
use crate::scalar::Probability;

/// Solves `A x = b` in place. `a` is row-major and square.
pub fn solve<T: Probability>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Usage("solve: dimension mismatch".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&r, &s| {
                a[r][col]
                    .pivot_weight()
                    .partial_cmp(&a[s][col].pivot_weight())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::Singular(format!("no pivot in column {col}")))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        if !T::is_exact() && a[col][col].pivot_weight() < 1e-13 {
            return Err(Error::Singular(format!("near-zero pivot in column {col}")));
        }
        let inv = T::one() / a[col][col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() * inv.clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[r] = b[r].clone() - delta;
        }
    }
    Ok((0..n).map(|i| b[i].clone() / a[i][i].clone()).collect())
}

/// The unique `pi` with `pi P = pi`, `sum pi = 1`, for a row-stochastic `p`.
/// Fails with [`Error::Singular`] when the stationary law is not unique.
pub fn stationary_distribution<T: Probability>(p: &[Vec<T>]) -> Result<Vec<T>> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Usage("empty matrix".into()));
    }
    // Rows 0..n-1 of (P^T - I), last row replaced by the normalization.
    let mut a: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = p[j][i].clone();
                    if i == j {
                        v - T::one()
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    a[n - 1] = vec![T::one(); n];
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    solve(a, b)
}
