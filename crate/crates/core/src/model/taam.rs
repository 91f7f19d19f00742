use nalgebra::DMatrix;

use super::assemble::grid_cells;
use super::{full_ranks, Assembled};
use crate::error::{invalid, Result};
use crate::tensor::{hosvd, mode_n_product, unfold, DenseTensor};

/// Mixture weights over pose, expression and illumination states. Each
/// vector lies on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCoefficients {
    c_p: Vec<f64>,
    c_e: Vec<f64>,
    c_l: Vec<f64>,
}

impl MixtureCoefficients {
    pub fn new(c_p: Vec<f64>, c_e: Vec<f64>, c_l: Vec<f64>) -> Result<Self> {
        for (name, c) in [("c_p", &c_p), ("c_e", &c_e), ("c_l", &c_l)] {
            if c.is_empty() {
                return invalid(format!("{name} is empty"));
            }
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return invalid(format!("{name} has entries outside [0, 1]"));
            }
            let s: f64 = c.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return invalid(format!("{name} sums to {s}, not 1"));
            }
        }
        Ok(Self { c_p, c_e, c_l })
    }

    /// Selects single states (the discrete variation-specific model).
    pub fn one_hot(extents: [usize; 4], pose: usize, expression: usize, illumination: usize) -> Result<Self> {
        let hot = |n: usize, k: usize| {
            let mut v = vec![0.0; n];
            if k < n {
                v[k] = 1.0;
            }
            v
        };
        Self::new(hot(extents[1], pose), hot(extents[3], expression), hot(extents[2], illumination))
    }

    pub fn uniform(extents: [usize; 4]) -> Self {
        let u = |n: usize| vec![1.0 / n as f64; n];
        Self {
            c_p: u(extents[1]),
            c_e: u(extents[3]),
            c_l: u(extents[2]),
        }
    }

    pub fn c_p(&self) -> &[f64] {
        &self.c_p
    }

    pub fn c_e(&self) -> &[f64] {
        &self.c_e
    }

    pub fn c_l(&self) -> &[f64] {
        &self.c_l
    }
}

/// Variation-specific linear models: basis columns plus weighted means.
#[derive(Debug, Clone)]
pub struct TaamModels {
    /// `2L x (R_i R_l)`.
    pub shape_basis: DMatrix<f64>,
    pub shape_mean: Vec<f64>,
    /// `I_t x (R_i R_p R_e)`.
    pub texture_basis: DMatrix<f64>,
    pub texture_mean: Vec<f64>,
}

/// Builds the shape basis `C_s ×_2 c_p^T S_p ×_4 c_e^T S_e ×_5 S_s` and the
/// texture basis `C_t ×_3 c_l^T T_l ×_5 T_t`, each unfolded along the
/// feature mode, from full-rank decompositions of the centered tensors.
///
/// The weighted means are coefficient-weighted averages of the slice means
/// over the selected states.
pub fn build_taam_variation_models(data: &Assembled, coeffs: &MixtureCoefficients) -> Result<TaamModels> {
    let dims = data.shape.dims();
    if coeffs.c_p.len() != dims[1] || coeffs.c_e.len() != dims[3] || coeffs.c_l.len() != dims[2] {
        return invalid(format!(
            "mixture lengths ({}, {}, {}) do not match extents {:?}",
            coeffs.c_p.len(),
            coeffs.c_e.len(),
            coeffs.c_l.len(),
            &dims[..4]
        ));
    }
    let ts = hosvd(&data.shape, &full_ranks(data.shape.dims()))?;
    let tt = hosvd(&data.texture, &full_ranks(data.texture.dims()))?;

    let wp = &ts.factors[1].transpose() * nalgebra::DVector::from_column_slice(&coeffs.c_p);
    let we = &ts.factors[3].transpose() * nalgebra::DVector::from_column_slice(&coeffs.c_e);
    let b_s = ts.core.contract(3, we.as_slice())?.contract(1, wp.as_slice())?;
    let b_s = mode_n_product(&b_s, &ts.factors[4], 2)?;
    let shape_basis = unfold(&b_s, 2)?;

    let wl = &tt.factors[2].transpose() * nalgebra::DVector::from_column_slice(&coeffs.c_l);
    let b_t = tt.core.contract(2, wl.as_slice())?;
    let b_t = mode_n_product(&b_t, &tt.factors[4], 3)?;
    let texture_basis = unfold(&b_t, 3)?;

    let shape_mean = weighted_mean(
        &data.shape,
        &data.mean_shape,
        |c| coeffs.c_p[c[1]] * coeffs.c_e[c[3]],
        dims[0] * dims[2],
    );
    let texture_mean = weighted_mean(
        &data.texture,
        &data.mean_texture,
        |c| coeffs.c_l[c[2]],
        dims[0] * dims[1] * dims[3],
    );
    Ok(TaamModels {
        shape_basis,
        shape_mean,
        texture_basis,
        texture_mean,
    })
}

/// `sum_states w(state) * (slice mean over the unweighted modes)`, written as
/// one pass over all cells with weight `w / free_cells`.
fn weighted_mean(x: &DenseTensor, mean: &[f64], weight: impl Fn(&[usize; 4]) -> f64, free_cells: usize) -> Vec<f64> {
    let dims = x.dims();
    let d = dims[4];
    let mut out = mean.to_vec();
    for (k, c) in grid_cells([dims[0], dims[1], dims[2], dims[3]]).enumerate() {
        let w = weight(&c) / free_cells as f64;
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(&x.as_slice()[k * d..(k + 1) * d]) {
            *o += w * v;
        }
    }
    out
}
