//! Dense symmetric solves for the collocation Gram system.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Bunch-Kaufman `P L B L^T P^T` factorization.
    SymmetricIndefinite,
    /// Truncated-SVD minimum-norm least squares.
    LeastSquares,
}

#[derive(Debug, Clone)]
pub(crate) struct SolveOutcome {
    pub x: Vec<f64>,
    pub condition_estimate: f64,
    pub method: SolveMethod,
}

// Relative residual above which the factorized solution is discarded.
const RESIDUAL_TOLERANCE: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 2;

/// Solves the symmetric system `a x = b`.
///
/// Tries a pivoted symmetric indefinite factorization, polished by iterative
/// refinement while the residual keeps shrinking, and falls back to SVD least
/// squares if that produces a non-finite or inaccurate solution.
pub(crate) fn solve_symmetric(a: &Mat<f64>, b: &[f64]) -> Result<SolveOutcome> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    if n == 0 {
        return Ok(SolveOutcome { x: vec![], condition_estimate: 1.0, method: SolveMethod::SymmetricIndefinite });
    }
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let a_norm = one_norm(a);

    let lblt = a.lblt(Side::Lower);
    let mut x = lblt.solve(&rhs);
    let mut residual = &rhs - a * &x;
    let mut residual_norm = inf_norm(&residual);
    for _ in 0..REFINEMENT_STEPS {
        let candidate = &x + lblt.solve(&residual);
        let r = &rhs - a * &candidate;
        let r_norm = inf_norm(&r);
        if !(r_norm < residual_norm) {
            break;
        }
        x = candidate;
        residual = r;
        residual_norm = r_norm;
    }
    let inverse_norm = estimate_inverse_one_norm(n, |v| lblt.solve(v));
    let condition_estimate = a_norm * inverse_norm;

    if is_acceptable(a, &x, &rhs) {
        return Ok(SolveOutcome {
            x: column(&x),
            condition_estimate: if condition_estimate.is_finite() { condition_estimate } else { f64::INFINITY },
            method: SolveMethod::SymmetricIndefinite,
        });
    }

    log::warn!("symmetric factorization rejected; falling back to least squares");
    let svd = a.thin_svd().map_err(|e| Error::Singular(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let s_max = (0..n).map(|i| s[i]).fold(0.0f64, f64::max);
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::Singular("matrix has no positive singular values".into()));
    }
    let cutoff = n as f64 * f64::EPSILON * s_max;
    let u = svd.U();
    let v = svd.V();
    let mut coeffs = vec![0.0; n];
    let mut s_min_kept = s_max;
    for k in 0..n {
        if s[k] > cutoff {
            let proj: f64 = (0..n).map(|i| u[(i, k)] * b[i]).sum();
            coeffs[k] = proj / s[k];
            s_min_kept = s_min_kept.min(s[k]);
        }
    }
    let x: Vec<f64> = (0..n).map(|i| (0..n).map(|k| v[(i, k)] * coeffs[k]).sum()).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("least-squares solution is not finite".into()));
    }
    Ok(SolveOutcome { x, condition_estimate: s_max / s_min_kept, method: SolveMethod::LeastSquares })
}

fn column(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn inf_norm(v: &Mat<f64>) -> f64 {
    (0..v.nrows()).map(|i| v[(i, 0)].abs()).fold(0.0, f64::max)
}

fn one_norm(a: &Mat<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn is_acceptable(a: &Mat<f64>, x: &Mat<f64>, b: &Mat<f64>) -> bool {
    let n = a.nrows();
    if (0..n).any(|i| !x[(i, 0)].is_finite()) {
        return false;
    }
    let ax = a * x;
    let residual = (0..n).map(|i| (ax[(i, 0)] - b[(i, 0)]).abs()).fold(0.0, f64::max);
    let a_inf = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let scale = a_inf * inf_norm(x) + inf_norm(b);
    scale == 0.0 || residual <= RESIDUAL_TOLERANCE * scale
}

/// Hager's estimator for `||A^{-1}||_1` of a symmetric `A`, given a solver for `A`.
fn estimate_inverse_one_norm(n: usize, solve: impl Fn(&Mat<f64>) -> Mat<f64>) -> f64 {
    let mut x = Mat::from_fn(n, 1, |_, _| 1.0 / n as f64);
    let mut estimate = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = solve(&x);
        estimate = (0..n).map(|i| y[(i, 0)].abs()).sum::<f64>();
        if !estimate.is_finite() {
            return f64::INFINITY;
        }
        let xi = Mat::from_fn(n, 1, |i, _| if y[(i, 0)] >= 0.0 { 1.0 } else { -1.0 });
        // symmetric: A^{-T} = A^{-1}
        let z = solve(&xi);
        let (j, zmax) = (0..n).map(|i| (i, z[(i, 0)].abs())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let ztx: f64 = (0..n).map(|i| z[(i, 0)] * x[(i, 0)]).sum();
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = Mat::from_fn(n, 1, |i, _| if i == j { 1.0 } else { 0.0 });
    }
    // Higham's extra probe guards against badly underestimating.
    let alt = Mat::from_fn(n, 1, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
    });
    let y = solve(&alt);
    let alt_est = 2.0 * (0..n).map(|i| y[(i, 0)].abs()).sum::<f64>() / (3.0 * n as f64);
    estimate.max(alt_est)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_indefinite_system() {
        let a = Mat::from_fn(3, 3, |i, j| [[0.0, 1.0, 2.0], [1.0, -3.0, 0.5], [2.0, 0.5, 1.0]][i][j]);
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x_true[j]).sum()).collect();
        let out = solve_symmetric(&a, &b).unwrap();
        assert_eq!(out.method, SolveMethod::SymmetricIndefinite);
        for (got, want) in out.x.iter().zip(x_true) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_estimate_of_diagonal_is_exact() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { [1.0, 10.0, 0.1, 5.0][i] } else { 0.0 });
        let out = solve_symmetric(&a, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((out.condition_estimate - 100.0).abs() < 1e-9, "{}", out.condition_estimate);
    }

    #[test]
    fn singular_system_falls_back_to_least_squares() {
        // rank one: [[1, 1], [1, 1]]
        let a = Mat::from_fn(2, 2, |_, _| 1.0);
        let out = solve_symmetric(&a, &[2.0, 2.0]).unwrap();
        assert_eq!(out.method, SolveMethod::LeastSquares);
        assert!((out.x[0] - 1.0).abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = Mat::<f64>::zeros(2, 2);
        assert!(matches!(solve_symmetric(&a, &[1.0, 0.0]), Err(Error::Singular(_))));
    }
}
