//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Solves `a x = b` (multiple right-hand sides) with partial-pivoting LU.
///
/// Returns `None` when the factorization hits an exactly singular pivot or
/// produces non-finite values.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Crude condition estimate from the LU pivots: ratio of largest to smallest
/// diagonal entry of U. Cheap, and good enough to flag near-singular systems.
pub fn pivot_condition(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let u = a.clone().lu().u();
    let diag = u.diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// 2-norm condition number via SVD. Only for small matrices.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Minimum-norm least-squares solution of `a x = b`, with the numerical rank.
///
/// Full column rank systems are solved through a Householder QR; otherwise
/// the truncated SVD gives the minimum-norm solution, refined once against
/// the residual.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), 0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    let rank = svd.rank(eps);
    if rank == a.ncols() && a.nrows() >= a.ncols() {
        let qr = a.clone().qr();
        let qtb = qr.q().transpose() * b;
        if let Some(x) = qr.r().solve_upper_triangular(&qtb) {
            return (x, rank);
        }
    }
    let solve = |rhs: &DVector<f64>| svd.solve(rhs, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    let mut x = solve(b);
    x += solve(&(b - a * &x));
    (x, rank)
}

/// Orthonormal basis of the null space of `a`, as columns.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to square so the SVD returns a full set of right singular vectors.
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.rows_mut(0, a.nrows()).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.max();
    let eps = smax.max(1.0) * (rows as f64) * f64::EPSILON * 16.0;
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= eps)
        .map(|(k, _)| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Max absolute entry, zero for empty matrices.
pub fn amax(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

pub fn vamax(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).amax() < 1e-12);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn lstsq_min_norm_on_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let (x, rank) = lstsq(&a, &b);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_lu_is_none() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(lu_solve(&a, &DMatrix::identity(2, 2)).is_none());
    }

    #[test]
    fn min_eigenvalue_detects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]);
        assert!((min_eigenvalue(&m) + 0.1).abs() < 1e-14);
    }
}
