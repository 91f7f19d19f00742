//! Evaluation and least-squares projection for models of the form
//! `y = C ×_1 a_1 ×_2 a_2 ... ×_K a_K`, where the core `C` has `K`
//! coefficient modes followed by one data mode.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::tensor::DenseTensor;

/// Ridge used when a per-mode system is rank deficient.
pub const ALS_FALLBACK_RIDGE: f64 = 1e-8;

/// Contracts every coefficient mode of `core` and returns the data vector.
pub fn evaluate(core: &DenseTensor, coeffs: &[&[f64]]) -> Result<Vec<f64>> {
    check(core, coeffs)?;
    let mut t = core.clone();
    for a in coeffs {
        t = t.contract(0, a)?;
    }
    Ok(t.into_vec())
}

/// `R_j x D` matrix obtained by contracting every coefficient mode except `j`.
pub fn mode_matrix(core: &DenseTensor, coeffs: &[&[f64]], j: usize) -> Result<DMatrix<f64>> {
    check(core, coeffs)?;
    let mut t = core.clone();
    for k in (0..coeffs.len()).rev() {
        if k != j {
            t = t.contract(k, coeffs[k])?;
        }
    }
    let (r, d) = (t.dims()[0], t.dims()[1]);
    Ok(DMatrix::from_row_slice(r, d, t.as_slice()))
}

/// Output of [`als_project`].
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<Vec<f64>>,
    /// Residual norm after every single-mode update.
    pub trace: Vec<f64>,
    /// Set when any per-mode solve needed the ridge fallback.
    pub ridge_fallback: bool,
}

/// Alternating least squares for `min ||C ×_1 a_1 ... ×_K a_K - target||`.
///
/// Starting from `init`, each round cycles through the modes in order and
/// solves for one coefficient vector with the others fixed. Every update is
/// an exact block minimization, so the residual never increases (up to the
/// ridge fallback for rank-deficient blocks).
pub fn als_project(
    core: &DenseTensor,
    target: &[f64],
    init: Vec<Vec<f64>>,
    rounds: usize,
) -> Result<Projection> {
    let refs: Vec<&[f64]> = init.iter().map(|v| v.as_slice()).collect();
    check(core, &refs)?;
    let d = *core.dims().last().unwrap();
    if target.len() != d {
        return invalid(format!("target has length {}, model expects {d}", target.len()));
    }
    let y = DVector::from_column_slice(target);
    let mut coeffs = init;
    let mut trace = Vec::with_capacity(rounds * coeffs.len());
    let mut ridge_fallback = false;
    for _ in 0..rounds {
        for j in 0..coeffs.len() {
            let refs: Vec<&[f64]> = coeffs.iter().map(|v| v.as_slice()).collect();
            let m = mode_matrix(core, &refs, j)?;
            let design = m.transpose();
            let (x, flagged) = crate::linalg::least_squares(&design, &y, ALS_FALLBACK_RIDGE);
            ridge_fallback |= flagged;
            let r = (&design * &x - &y).norm();
            coeffs[j] = x.as_slice().to_vec();
            trace.push(r);
        }
    }
    Ok(Projection {
        coeffs,
        trace,
        ridge_fallback,
    })
}

fn check(core: &DenseTensor, coeffs: &[&[f64]]) -> Result<()> {
    if core.order() != coeffs.len() + 1 {
        return invalid(format!(
            "{} coefficient vectors for a core of order {}",
            coeffs.len(),
            core.order()
        ));
    }
    for (n, a) in coeffs.iter().enumerate() {
        if a.len() != core.dims()[n] {
            return invalid(format!(
                "coefficient vector {n} has length {}, expected {}",
                a.len(),
                core.dims()[n]
            ));
        }
    }
    Ok(())
}
