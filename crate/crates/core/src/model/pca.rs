use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::linalg::{sym_eigen_desc, SVD_RANK_TOL};

/// A linear model `mean + basis * coeffs` with orthonormal basis columns
/// and the sample variance along each.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    pub basis: DMatrix<f64>,
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaBasis {
    pub fn num_components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.basis.ncols() {
            return invalid(format!(
                "{} coefficients for {} components",
                coeffs.len(),
                self.basis.ncols()
            ));
        }
        let v = &self.basis * DVector::from_column_slice(coeffs);
        Ok(v.iter().zip(&self.mean).map(|(a, m)| a + m).collect())
    }

    /// Orthogonal projection coefficients `basis^T (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return invalid(format!("vector has length {}, model expects {}", x.len(), self.mean.len()));
        }
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, m)| a - m));
        Ok((self.basis.transpose() * d).as_slice().to_vec())
    }
}

/// The classical PCA shape and texture models.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaAamModel {
    pub shape: PcaBasis,
    pub texture: PcaBasis,
}

/// PCA of aligned shapes and shape-free textures, keeping for each the
/// smallest number of components whose variance reaches `fraction` of the
/// total.
pub fn build_pca_aam(shapes: &[Vec<f64>], textures: &[Vec<f64>], fraction: f64) -> Result<PcaAamModel> {
    if !(0.0..=1.0).contains(&fraction) {
        return invalid(format!("variance fraction {fraction} outside [0, 1]"));
    }
    Ok(PcaAamModel {
        shape: pca(shapes, fraction)?,
        texture: pca(textures, fraction)?,
    })
}

/// PCA through the eigendecomposition of the smaller Gram matrix of the
/// centered data.
pub fn pca(samples: &[Vec<f64>], fraction: f64) -> Result<PcaBasis> {
    let n = samples.len();
    if n < 2 {
        return invalid(format!("PCA needs at least 2 samples, got {n}"));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return invalid("PCA samples must be non-empty and of equal length");
    }
    let mean: Vec<f64> = (0..d).map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(d, n, |r, c| samples[c][r] - mean[r]);
    let (vals, vecs) = if n <= d {
        let (vals, v) = sym_eigen_desc(x.transpose() * &x);
        let u = left_from_right(&x, &vals, &v);
        (vals, u)
    } else {
        sym_eigen_desc(&x * x.transpose())
    };
    let smax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let nonzero: Vec<f64> = vals
        .iter()
        .copied()
        .take_while(|&v| v > SVD_RANK_TOL * SVD_RANK_TOL * smax.max(f64::MIN_POSITIVE) && v > 0.0)
        .collect();
    let total: f64 = nonzero.iter().sum();
    let mut k = 0;
    let mut acc = 0.0;
    while k < nonzero.len() && acc < fraction * total {
        acc += nonzero[k];
        k += 1;
    }
    let k = k.min(vecs.ncols());
    Ok(PcaBasis {
        mean,
        basis: vecs.columns(0, k).into_owned(),
        eigenvalues: nonzero[..k].iter().map(|v| v / (n - 1) as f64).collect(),
    })
}

/// Left singular vectors `x v_k / sigma_k` for the nonzero eigenpairs of
/// `x^T x`.
fn left_from_right(x: &DMatrix<f64>, vals: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let smax = vals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    let cols: Vec<DVector<f64>> = vals
        .iter()
        .enumerate()
        .take_while(|(_, &lam)| lam > 0.0 && lam.sqrt() > SVD_RANK_TOL * smax)
        .map(|(k, &lam)| x * v.column(k) / lam.sqrt())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(x.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
