//! Small dense linear-algebra helpers shared by the decomposition, PCA and
//! regression code. Everything here works on `nalgebra` matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::{unfold, DenseTensor};

/// Singular values below `SVD_RANK_TOL * sigma_max` count as zero.
pub const SVD_RANK_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix with eigenpairs sorted by
/// decreasing eigenvalue (ties keep their original order).
pub fn sym_eigen_desc(g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = g.nrows();
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Flips each column so that its largest-magnitude entry is positive.
pub fn fix_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Extends the orthonormal columns of `u` to `cols` orthonormal columns by
/// Gram-Schmidt against the standard basis vectors, in index order.
pub fn complete_basis(u: DMatrix<f64>, cols: usize) -> DMatrix<f64> {
    let n = u.nrows();
    let mut basis: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while basis.len() < cols && e < n {
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v.axpy(-d, b, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            basis.push(v / nv);
        }
        e += 1;
    }
    DMatrix::from_columns(&basis)
}

/// Leading `rank` left singular vectors of the mode-`mode` unfolding of `x`,
/// sign-fixed. When the unfolding is wide the row Gram matrix is
/// eigendecomposed directly; when it is tall the column Gram matrix is used
/// and the basis is completed if the unfolding is rank deficient.
pub fn leading_left_singular_vectors(
    x: &DenseTensor,
    mode: usize,
    rank: usize,
) -> Result<DMatrix<f64>> {
    let n = x.dims()[mode];
    let cols = x.len() / n;
    let mut u = if n <= cols {
        let g = x.mode_gram(mode)?;
        check_finite(&g)?;
        let (_, vecs) = sym_eigen_desc(g);
        vecs.columns(0, rank).into_owned()
    } else {
        let m = unfold(x, mode)?;
        let g = m.transpose() * &m;
        check_finite(&g)?;
        let (vals, vecs) = sym_eigen_desc(g);
        let smax = vals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
        let mut kept = Vec::new();
        for (k, &lam) in vals.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            if kept.len() == rank || s <= SVD_RANK_TOL * smax || s == 0.0 {
                break;
            }
            let mut col = &m * vecs.column(k);
            col /= s;
            // re-orthonormalize against what we have to absorb rounding
            for b in &kept {
                let d = col.dot(b);
                col.axpy(-d, b, 1.0);
            }
            let nc = col.norm();
            if nc < 1e-8 {
                break;
            }
            kept.push(col / nc);
        }
        let base = if kept.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&kept)
        };
        complete_basis(base, rank)
    };
    fix_signs(&mut u);
    Ok(u)
}

/// Solves the symmetric positive definite system `a x = b`.
///
/// Returns `None` when `a` is not numerically positive definite: the
/// Cholesky factorization fails or its pivots span more than `1e14`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || min < 1e-14 * max {
        return None;
    }
    Some(chol.solve(b))
}

/// Least-squares solution of `m x = y` via the normal equations, with a
/// ridge of `fallback_ridge` added when the system is rank deficient.
/// The boolean reports whether the fallback was needed.
pub fn least_squares(
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    fallback_ridge: f64,
) -> (DVector<f64>, bool) {
    let mtm = m.transpose() * m;
    let mty = DMatrix::from_column_slice(m.ncols(), 1, (m.transpose() * y).as_slice());
    if let Some(x) = solve_spd(&mtm, &mty) {
        return (x.column(0).into_owned(), false);
    }
    let scale = (mtm.trace() / mtm.nrows().max(1) as f64).max(1.0);
    let reg = &mtm + DMatrix::identity(mtm.nrows(), mtm.ncols()) * (fallback_ridge * scale);
    let x = match reg.clone().cholesky() {
        Some(c) => c.solve(&mty),
        None => DMatrix::zeros(m.ncols(), 1),
    };
    (x.column(0).into_owned(), true)
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(
            "non-finite values in matrix passed to the eigensolver".into(),
        ))
    }
}

pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    (g - DMatrix::identity(u.ncols(), u.ncols())).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_desc() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let (vals, vecs) = sym_eigen_desc(g);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[2] - 1.0).abs() < 1e-12);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signs_fixed() {
        let mut u = DMatrix::from_row_slice(2, 1, &[0.1, -0.9]);
        fix_signs(&mut u);
        assert!(u[(1, 0)] > 0.0);
    }

    #[test]
    fn basis_completion_is_orthonormal() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0]);
        let full = complete_basis(u, 3);
        assert_eq!(full.ncols(), 3);
        assert!(orthonormality_error(&full) < 1e-12);
    }

    #[test]
    fn spd_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(solve_spd(&a, &DMatrix::zeros(2, 1)).is_none());
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_spd(&b, &DMatrix::from_row_slice(2, 1, &[2.0, 4.0])).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14 && (x[(1, 0)] - 1.0).abs() < 1e-14);
    }
}
