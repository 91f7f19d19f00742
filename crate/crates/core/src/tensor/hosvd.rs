use nalgebra::DMatrix;

use super::{mode_n_product, DenseTensor};
use crate::error::{invalid, Result};
use crate::linalg::leading_left_singular_vectors;

/// Tucker decomposition `X = C ×_1 U_1 ×_2 U_2 ... ×_N U_N`.
///
/// Each factor `U_n` is `I_n x R_n` with orthonormal columns and the core
/// has extents `(R_1, .., R_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    pub core: DenseTensor,
    pub factors: Vec<DMatrix<f64>>,
}

impl TuckerModel {
    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }
}

/// Truncated higher-order SVD.
///
/// `factors[n]` holds the leading `ranks[n]` left singular vectors of the
/// mode-n unfolding; the core is `X ×_1 U_1^T ... ×_N U_N^T`.
pub fn hosvd(x: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    check_ranks(x.dims(), ranks)?;
    let factors = (0..x.order())
        .map(|n| leading_left_singular_vectors(x, n, ranks[n]))
        .collect::<Result<Vec<_>>>()?;
    let core = project(x, &factors)?;
    Ok(TuckerModel { core, factors })
}

/// `C ×_1 U_1 ×_2 U_2 ... ×_N U_N`.
pub fn tucker_reconstruct(t: &TuckerModel) -> Result<DenseTensor> {
    if t.factors.len() != t.core.order() {
        return invalid(format!(
            "{} factors for a core of order {}",
            t.factors.len(),
            t.core.order()
        ));
    }
    let mut out = t.core.clone();
    for (n, u) in t.factors.iter().enumerate() {
        out = mode_n_product(&out, u, n)?;
    }
    Ok(out)
}

/// One sweep of higher-order orthogonal iteration warm-started from
/// `factors`. Every mode update maximizes the projected norm with the other
/// factors held fixed, so the approximation error never increases.
pub fn hooi_sweep(x: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<TuckerModel> {
    let ranks: Vec<usize> = factors.iter().map(|u| u.ncols()).collect();
    check_ranks(x.dims(), &ranks)?;
    let mut factors = factors.to_vec();
    for n in 0..x.order() {
        let mut y = x.clone();
        for (k, u) in factors.iter().enumerate() {
            if k != n {
                y = mode_n_product(&y, &u.transpose(), k)?;
            }
        }
        factors[n] = leading_left_singular_vectors(&y, n, ranks[n])?;
    }
    let core = project(x, &factors)?;
    Ok(TuckerModel { core, factors })
}

fn project(x: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<DenseTensor> {
    let mut core = x.clone();
    for (n, u) in factors.iter().enumerate() {
        core = mode_n_product(&core, &u.transpose(), n)?;
    }
    Ok(core)
}

fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return invalid(format!(
            "{} ranks given for a tensor of order {}",
            ranks.len(),
            dims.len()
        ));
    }
    for (n, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > d {
            return invalid(format!("rank {r} for mode {n} must lie in 1..={d}"));
        }
    }
    Ok(())
}
