//! Unified multilinear shape and texture models, the PCA baseline, and the
//! variation-specific bases built from mixture coefficients.
//!
//! Tensors are indexed `(identity, pose, illumination, expression,
//! feature)`. After centering, both tensors are decomposed by HOSVD. The
//! illumination and landmark factors are folded into the shape core and the
//! pixel factor into the texture core, so that a shape is
//!
//! `s = mean_s + C̃_s ×_1 a_i ×_2 a_p ×_3 a_e`
//!
//! and a texture is
//!
//! `t = mean_t + C̃_t ×_1 b_i ×_2 b_p ×_3 b_l ×_4 b_e`.
//!
//! The coefficient vectors of a training sample are the corresponding rows
//! of the mode matrices.

mod assemble;
pub mod io;
pub mod multilinear;
mod pca;
mod taam;

pub use assemble::{assemble_tensors, default_completion_ranks, grid_cells, Assembled, CompletionPolicy, CompletionSolver, SampleGrid};
pub use pca::{build_pca_aam, PcaAamModel, PcaBasis};
pub use taam::{build_taam_variation_models, MixtureCoefficients, TaamModels};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::features::HogSpec;
use crate::geometry::{apply_affine, AffineParams, FaceShape, ReferenceMesh};
use crate::tensor::{hosvd, mode_n_product, DenseTensor};

/// Shape parameters `p`: a global similarity plus identity, pose and
/// expression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeParams {
    pub affine: AffineParams,
    pub a_i: Vec<f64>,
    pub a_p: Vec<f64>,
    pub a_e: Vec<f64>,
}

impl ShapeParams {
    /// Number of entries of the flat vector, `4 + |a_i| + |a_p| + |a_e|`.
    pub fn len(&self) -> usize {
        4 + self.a_i.len() + self.a_p.len() + self.a_e.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[scale, theta, tx, ty, a_i.., a_p.., a_e..]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let g = &self.affine;
        let mut v = vec![g.scale, g.theta, g.tx, g.ty];
        v.extend_from_slice(&self.a_i);
        v.extend_from_slice(&self.a_p);
        v.extend_from_slice(&self.a_e);
        v
    }

    /// Inverse of [`to_vector`](Self::to_vector) for ranks `[R_i, R_p, R_e]`.
    pub fn from_vector(v: &[f64], ranks: [usize; 3]) -> Result<Self> {
        let n = 4 + ranks.iter().sum::<usize>();
        if v.len() != n {
            return invalid(format!("parameter vector has length {}, expected {n}", v.len()));
        }
        let affine = AffineParams::new(v[0], v[1], v[2], v[3])?;
        let (a_i, rest) = v[4..].split_at(ranks[0]);
        let (a_p, a_e) = rest.split_at(ranks[1]);
        if a_i.iter().chain(a_p).chain(a_e).any(|x| !x.is_finite()) {
            return invalid("shape coefficients must be finite");
        }
        Ok(Self {
            affine,
            a_i: a_i.to_vec(),
            a_p: a_p.to_vec(),
            a_e: a_e.to_vec(),
        })
    }
}

/// Texture parameters `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureParams {
    pub b_i: Vec<f64>,
    pub b_p: Vec<f64>,
    pub b_l: Vec<f64>,
    pub b_e: Vec<f64>,
}

impl TextureParams {
    pub fn as_refs(&self) -> [&[f64]; 4] {
        [&self.b_i, &self.b_p, &self.b_l, &self.b_e]
    }
}

/// Retained Tucker ranks for the `(i, p, l, e, feature)` modes of each
/// tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UtaamRanks {
    pub shape: [usize; 5],
    pub texture: [usize; 5],
}

impl UtaamRanks {
    /// The largest useful rank per mode: `min(I_n, prod_{k != n} I_k)`.
    pub fn full(shape_dims: &[usize], texture_dims: &[usize]) -> Self {
        Self {
            shape: full_ranks(shape_dims),
            texture: full_ranks(texture_dims),
        }
    }
}

pub fn full_ranks(dims: &[usize]) -> [usize; 5] {
    let mut r = [1usize; 5];
    let total: usize = dims.iter().product();
    for (n, rn) in r.iter_mut().enumerate().take(dims.len()) {
        *rn = dims[n].min(total / dims[n].max(1));
    }
    r
}

/// The unified tensor AAM.
#[derive(Debug, Clone, PartialEq)]
pub struct UtaamModel {
    mean_shape: Vec<f64>,
    mean_texture: Vec<f64>,
    core_s: DenseTensor,
    core_t: DenseTensor,
    shape_modes: [DMatrix<f64>; 3],
    texture_modes: [DMatrix<f64>; 4],
    mesh: ReferenceMesh,
    hog: HogSpec,
}

impl UtaamModel {
    /// Assembles a model from its parts, checking every dimension.
    ///
    /// `core_s` is `R_i x R_p x R_e x 2L`, `core_t` is
    /// `R_i x R_p x R_l x R_e x I_t`, and each mode matrix has one column
    /// per retained rank.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mean_shape: Vec<f64>,
        mean_texture: Vec<f64>,
        core_s: DenseTensor,
        core_t: DenseTensor,
        shape_modes: [DMatrix<f64>; 3],
        texture_modes: [DMatrix<f64>; 4],
        mesh: ReferenceMesh,
        hog: HogSpec,
    ) -> Result<Self> {
        hog.validate()?;
        if core_s.order() != 4 || core_t.order() != 5 {
            return invalid(format!(
                "cores must be 4-way and 5-way, got {:?} and {:?}",
                core_s.dims(),
                core_t.dims()
            ));
        }
        if mean_shape.len() != core_s.dims()[3] || mean_shape.len() != 2 * mesh.num_points() {
            return invalid("mean shape, shape core and mesh disagree on landmark count");
        }
        if mean_texture.len() != core_t.dims()[4] || mean_texture.len() != mesh.texture_len() {
            return invalid("mean texture, texture core and mesh disagree on texture length");
        }
        for (n, m) in shape_modes.iter().enumerate() {
            if m.ncols() != core_s.dims()[n] {
                return invalid(format!("shape mode matrix {n} does not match the core"));
            }
        }
        for (n, m) in texture_modes.iter().enumerate() {
            if m.ncols() != core_t.dims()[n] {
                return invalid(format!("texture mode matrix {n} does not match the core"));
            }
        }
        if shape_modes[0].nrows() != texture_modes[0].nrows()
            || shape_modes[1].nrows() != texture_modes[1].nrows()
            || shape_modes[2].nrows() != texture_modes[3].nrows()
        {
            return invalid("shape and texture models disagree on the number of states");
        }
        Ok(Self {
            mean_shape,
            mean_texture,
            core_s,
            core_t,
            shape_modes,
            texture_modes,
            mesh,
            hog,
        })
    }

    pub fn mean_shape(&self) -> &[f64] {
        &self.mean_shape
    }

    pub fn mean_texture(&self) -> &[f64] {
        &self.mean_texture
    }

    /// `C̃_s`, `R_i x R_p x R_e x 2L`.
    pub fn shape_core(&self) -> &DenseTensor {
        &self.core_s
    }

    /// `C̃_t`, `R_i x R_p x R_l x R_e x I_t`.
    pub fn texture_core(&self) -> &DenseTensor {
        &self.core_t
    }

    /// `[S_i, S_p, S_e]`.
    pub fn shape_modes(&self) -> &[DMatrix<f64>; 3] {
        &self.shape_modes
    }

    /// `[T_i, T_p, T_l, T_e]`.
    pub fn texture_modes(&self) -> &[DMatrix<f64>; 4] {
        &self.texture_modes
    }

    pub fn mesh(&self) -> &ReferenceMesh {
        &self.mesh
    }

    pub fn hog(&self) -> &HogSpec {
        &self.hog
    }

    pub fn num_points(&self) -> usize {
        self.mean_shape.len() / 2
    }

    pub fn texture_len(&self) -> usize {
        self.mean_texture.len()
    }

    /// `(I_i, I_p, I_l, I_e)`.
    pub fn extents(&self) -> [usize; 4] {
        [
            self.texture_modes[0].nrows(),
            self.texture_modes[1].nrows(),
            self.texture_modes[2].nrows(),
            self.texture_modes[3].nrows(),
        ]
    }

    /// `[R_i, R_p, R_e]` of the shape model.
    pub fn shape_ranks(&self) -> [usize; 3] {
        [self.core_s.dims()[0], self.core_s.dims()[1], self.core_s.dims()[2]]
    }

    /// `N_p`.
    pub fn num_shape_params(&self) -> usize {
        4 + self.shape_ranks().iter().sum::<usize>()
    }

    /// Shape in the normalized model frame, mean included.
    pub fn synthesize_shape_normalized(&self, a_i: &[f64], a_p: &[f64], a_e: &[f64]) -> Result<Vec<f64>> {
        let d = multilinear::evaluate(&self.core_s, &[a_i, a_p, a_e])?;
        Ok(d.iter().zip(&self.mean_shape).map(|(x, m)| x + m).collect())
    }

    /// Normalized shape placed in the image by `p.affine`.
    pub fn synthesize_shape(&self, p: &ShapeParams) -> Result<FaceShape> {
        let s = self.synthesize_shape_normalized(&p.a_i, &p.a_p, &p.a_e)?;
        Ok(apply_affine(&FaceShape::new(s)?, &p.affine))
    }

    /// Raw (unclipped) texture on the reference lattice.
    pub fn synthesize_texture(&self, q: &TextureParams) -> Result<Vec<f64>> {
        let d = multilinear::evaluate(&self.core_t, &q.as_refs())?;
        Ok(d.iter().zip(&self.mean_texture).map(|(x, m)| x + m).collect())
    }

    /// Shape coefficient rows of training cell `(i, p, e)` with the given
    /// similarity.
    pub fn training_shape_params(&self, i: usize, p: usize, e: usize, affine: AffineParams) -> Result<ShapeParams> {
        Ok(ShapeParams {
            affine,
            a_i: row(&self.shape_modes[0], i)?,
            a_p: row(&self.shape_modes[1], p)?,
            a_e: row(&self.shape_modes[2], e)?,
        })
    }

    /// Texture coefficient rows of training cell `(i, p, l, e)`.
    pub fn training_texture_params(&self, i: usize, p: usize, l: usize, e: usize) -> Result<TextureParams> {
        Ok(TextureParams {
            b_i: row(&self.texture_modes[0], i)?,
            b_p: row(&self.texture_modes[1], p)?,
            b_l: row(&self.texture_modes[2], l)?,
            b_e: row(&self.texture_modes[3], e)?,
        })
    }

    /// Shape coefficients set to the mean row of each mode matrix.
    pub fn mean_shape_params(&self, affine: AffineParams) -> ShapeParams {
        ShapeParams {
            affine,
            a_i: mean_row(&self.shape_modes[0]),
            a_p: mean_row(&self.shape_modes[1]),
            a_e: mean_row(&self.shape_modes[2]),
        }
    }

    /// Texture coefficients set to the mean row of each mode matrix.
    pub fn mean_texture_params(&self) -> TextureParams {
        TextureParams {
            b_i: mean_row(&self.texture_modes[0]),
            b_p: mean_row(&self.texture_modes[1]),
            b_l: mean_row(&self.texture_modes[2]),
            b_e: mean_row(&self.texture_modes[3]),
        }
    }

    /// Shape pose coefficients between two training poses,
    /// `(1 - t) S_p[a] + t S_p[b]`.
    pub fn interpolate_pose(&self, a: usize, b: usize, t: f64) -> Result<Vec<f64>> {
        interpolate_rows(&self.shape_modes[1], a, b, t)
    }

    /// Texture counterpart of [`interpolate_pose`](Self::interpolate_pose).
    pub fn interpolate_texture_pose(&self, a: usize, b: usize, t: f64) -> Result<Vec<f64>> {
        interpolate_rows(&self.texture_modes[1], a, b, t)
    }
}

/// `(1 - t) M[a] + t M[b]` for `t` in `[0, 1]`.
pub fn interpolate_rows(m: &DMatrix<f64>, a: usize, b: usize, t: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("interpolation parameter {t} outside [0, 1]"));
    }
    let (ra, rb) = (row(m, a)?, row(m, b)?);
    if t == 0.0 {
        return Ok(ra);
    }
    if t == 1.0 {
        return Ok(rb);
    }
    Ok(ra.iter().zip(&rb).map(|(x, y)| (1.0 - t) * x + t * y).collect())
}

fn row(m: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    if k >= m.nrows() {
        return invalid(format!("state index {k} out of range for {} states", m.nrows()));
    }
    Ok(m.row(k).iter().copied().collect())
}

fn mean_row(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows().max(1) as f64;
    m.column_iter().map(|c| c.sum() / n).collect()
}

/// Folds the illumination mode (contracted with `illum`) and the landmark
/// factor `s_s` into a 5-way shape core, giving `R_i x R_p x R_e x 2L`.
pub fn compress_shape_core(core: &DenseTensor, s_s: &DMatrix<f64>, illum: &[f64]) -> Result<DenseTensor> {
    if core.order() != 5 {
        return invalid(format!("shape core must be 5-way, got {:?}", core.dims()));
    }
    let folded = core.contract(2, illum)?;
    mode_n_product(&folded, s_s, 3)
}

/// Shape from the uncompressed model,
/// `mean + C_s ×_1 a_i ×_2 a_p ×_3 a_l ×_4 a_e ×_5 S_s`.
pub fn synthesize_shape_uncompressed(
    mean: &[f64],
    core: &DenseTensor,
    s_s: &DMatrix<f64>,
    coeffs: [&[f64]; 4],
) -> Result<Vec<f64>> {
    let c = multilinear::evaluate(core, &coeffs)?;
    if s_s.ncols() != c.len() || s_s.nrows() != mean.len() {
        return invalid("landmark factor does not match the core and mean");
    }
    let v = s_s * nalgebra::DVector::from_column_slice(&c);
    Ok(v.iter().zip(mean).map(|(x, m)| x + m).collect())
}

/// Decomposes the centered tensors and folds them into a [`UtaamModel`].
///
/// The shape core's illumination mode is contracted with the mean row of
/// `S_l`; shapes do not depend on illumination, so for shape data that is
/// constant over illumination every row gives the same result.
pub fn build_utaam(data: &Assembled, ranks: &UtaamRanks, mesh: ReferenceMesh, hog: HogSpec) -> Result<UtaamModel> {
    let ts = hosvd(&data.shape, &ranks.shape)?;
    let tt = hosvd(&data.texture, &ranks.texture)?;
    let s_l = &ts.factors[2];
    let core_s = compress_shape_core(&ts.core, &ts.factors[4], &mean_row(s_l))?;
    let core_t = mode_n_product(&tt.core, &tt.factors[4], 4)?;
    let [si, sp, _, se, _] = <[DMatrix<f64>; 5]>::try_from(ts.factors).expect("5 factors");
    let [ti, tp, tl, te, _] = <[DMatrix<f64>; 5]>::try_from(tt.factors).expect("5 factors");
    UtaamModel::from_parts(
        data.mean_shape.clone(),
        data.mean_texture.clone(),
        core_s,
        core_t,
        [si, sp, se],
        [ti, tp, tl, te],
        mesh,
        hog,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_reference_mesh;
    use crate::linalg::orthonormality_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh() -> ReferenceMesh {
        let s = FaceShape::from_points(&[(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0)]).unwrap();
        build_reference_mesh(&[s], 3.0).unwrap()
    }

    fn random(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn assembled(seed: u64) -> Assembled {
        let m = mesh();
        let (ii, ip, il, ie) = (3, 2, 2, 2);
        let base = random(&[ii, ip, 1, ie, 8], seed);
        // shapes are illumination independent
        let shape = DenseTensor::from_fn(&[ii, ip, il, ie, 8], |c| base.get(&[c[0], c[1], 0, c[3], c[4]])).unwrap();
        let texture = random(&[ii, ip, il, ie, m.texture_len()], seed + 1);
        Assembled::from_centered(shape, texture, vec![0.5; 8], vec![0.25; m.texture_len()]).unwrap()
    }

    #[test]
    fn full_rank_reproduces_training_samples() {
        let data = assembled(1);
        let ranks = UtaamRanks::full(data.shape.dims(), data.texture.dims());
        let m = build_utaam(&data, &ranks, mesh(), HogSpec::default()).unwrap();
        for u in m.shape_modes().iter().chain(m.texture_modes()) {
            assert!(orthonormality_error(u) < 1e-8);
        }
        for i in 0..3 {
            for p in 0..2 {
                for l in 0..2 {
                    for e in 0..2 {
                        let sp = m.training_shape_params(i, p, e, AffineParams::IDENTITY).unwrap();
                        let s = m.synthesize_shape(&sp).unwrap();
                        for (k, v) in s.as_slice().iter().enumerate() {
                            let want = data.shape.get(&[i, p, l, e, k]) + 0.5;
                            assert!((v - want).abs() < 1e-10);
                        }
                        let q = m.training_texture_params(i, p, l, e).unwrap();
                        let t = m.synthesize_texture(&q).unwrap();
                        for (k, v) in t.iter().enumerate() {
                            let want = data.texture.get(&[i, p, l, e, k]) + 0.25;
                            assert!((v - want).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_coefficients_give_means() {
        let data = assembled(2);
        let ranks = UtaamRanks::full(data.shape.dims(), data.texture.dims());
        let m = build_utaam(&data, &ranks, mesh(), HogSpec::default()).unwrap();
        let r = m.shape_ranks();
        let p = ShapeParams {
            affine: AffineParams::IDENTITY,
            a_i: vec![0.0; r[0]],
            a_p: vec![0.0; r[1]],
            a_e: vec![0.0; r[2]],
        };
        assert_eq!(m.synthesize_shape(&p).unwrap().as_slice(), m.mean_shape());
        let mut q = m.mean_texture_params();
        q.b_i.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(m.synthesize_texture(&q).unwrap(), m.mean_texture());
    }

    #[test]
    fn zero_tensors_give_zero_cores() {
        let m = mesh();
        let data = Assembled::from_centered(
            DenseTensor::zeros(&[2, 2, 1, 1, 8]).unwrap(),
            DenseTensor::zeros(&[2, 2, 1, 1, m.texture_len()]).unwrap(),
            vec![1.0; 8],
            vec![0.5; m.texture_len()],
        )
        .unwrap();
        let ranks = UtaamRanks::full(data.shape.dims(), data.texture.dims());
        let model = build_utaam(&data, &ranks, m, HogSpec::default()).unwrap();
        assert!(model.shape_core().as_slice().iter().all(|&v| v == 0.0));
        assert!(model.texture_core().as_slice().iter().all(|&v| v == 0.0));
        let sp = model.training_shape_params(1, 0, 0, AffineParams::IDENTITY).unwrap();
        assert_eq!(model.synthesize_shape(&sp).unwrap().as_slice(), &[1.0; 8]);
    }

    #[test]
    fn rank_above_extent_is_rejected() {
        let data = assembled(3);
        let mut ranks = UtaamRanks::full(data.shape.dims(), data.texture.dims());
        ranks.shape[0] = 4;
        assert!(build_utaam(&data, &ranks, mesh(), HogSpec::default()).is_err());
    }

    #[test]
    fn multilinearity() {
        let data = assembled(4);
        let ranks = UtaamRanks::full(data.shape.dims(), data.texture.dims());
        let m = build_utaam(&data, &ranks, mesh(), HogSpec::default()).unwrap();
        let base = m.mean_shape_params(AffineParams::IDENTITY);
        let s1 = m.synthesize_shape(&base).unwrap();
        for alpha in [-2.0, 0.5, 3.0] {
            let mut p = base.clone();
            p.a_p.iter_mut().for_each(|v| *v *= alpha);
            let s2 = m.synthesize_shape(&p).unwrap();
            for ((a, b), mu) in s2.as_slice().iter().zip(s1.as_slice()).zip(m.mean_shape()) {
                assert!(((a - mu) - alpha * (b - mu)).abs() < 1e-10);
            }
        }
        let q = m.training_texture_params(1, 1, 0, 1).unwrap();
        let t1 = m.synthesize_texture(&q).unwrap();
        let mut q2 = q.clone();
        q2.b_l.iter_mut().for_each(|v| *v *= -1.5);
        let t2 = m.synthesize_texture(&q2).unwrap();
        for ((a, b), mu) in t2.iter().zip(&t1).zip(m.mean_texture()) {
            assert!(((a - mu) + 1.5 * (b - mu)).abs() < 1e-10);
        }
    }

    #[test]
    fn compression_matches_uncompressed_model() {
        let x = random(&[3, 2, 3, 2, 6], 7);
        let t = hosvd(&x, &[3, 2, 3, 2, 6]).unwrap();
        let mean = vec![0.1; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut coeff = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (ai, ap, ae) = (coeff(3), coeff(2), coeff(2));
        for l in 0..3 {
            let mut onehot = vec![0.0; 3];
            onehot[l] = 1.0;
            let state_row: Vec<f64> = t.factors[2].row(l).iter().copied().collect();
            for al in [onehot, state_row] {
                let full = synthesize_shape_uncompressed(&mean, &t.core, &t.factors[4], [&ai, &ap, &al, &ae]).unwrap();
                let c = compress_shape_core(&t.core, &t.factors[4], &al).unwrap();
                let comp = multilinear::evaluate(&c, &[&ai, &ap, &ae]).unwrap();
                for ((u, v), m) in full.iter().zip(&comp).zip(&mean) {
                    assert!((u - (v + m)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn fold_commutes_with_truncation_of_other_modes() {
        let x = random(&[3, 3, 2, 2, 6], 9);
        let t = hosvd(&x, &[3, 3, 2, 2, 6]).unwrap();
        let w = [0.3, -0.8];
        // fold first, then truncate identity and pose modes
        let folded = compress_shape_core(&t.core, &t.factors[4], &w).unwrap();
        let mut a = folded.clone();
        for (mode, keep) in [(0usize, 2usize), (1, 1)] {
            let proj = DMatrix::from_fn(keep, a.dims()[mode], |r, c| if r == c { 1.0 } else { 0.0 });
            a = mode_n_product(&a, &proj, mode).unwrap();
        }
        // truncate first, then fold
        let mut core = t.core.clone();
        for (mode, keep) in [(0usize, 2usize), (1, 1)] {
            let proj = DMatrix::from_fn(keep, core.dims()[mode], |r, c| if r == c { 1.0 } else { 0.0 });
            core = mode_n_product(&core, &proj, mode).unwrap();
        }
        let b = compress_shape_core(&core, &t.factors[4], &w).unwrap();
        assert_eq!(a.dims(), b.dims());
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_endpoints_and_bounds() {
        let data = assembled(5);
        let ranks = UtaamRanks::full(data.shape.dims(), data.texture.dims());
        let m = build_utaam(&data, &ranks, mesh(), HogSpec::default()).unwrap();
        let sp = &m.shape_modes()[1];
        assert_eq!(m.interpolate_pose(0, 1, 0.0).unwrap(), sp.row(0).iter().copied().collect::<Vec<_>>());
        assert_eq!(m.interpolate_pose(0, 1, 1.0).unwrap(), sp.row(1).iter().copied().collect::<Vec<_>>());
        assert!(m.interpolate_pose(0, 1, 1.5).is_err());
        assert!(m.interpolate_pose(0, 2, 0.5).is_err());
    }

    #[test]
    fn params_vector_round_trip() {
        let p = ShapeParams {
            affine: AffineParams::new(2.0, 0.3, 1.0, -4.0).unwrap(),
            a_i: vec![0.1, 0.2],
            a_p: vec![0.3],
            a_e: vec![0.4, 0.5, 0.6],
        };
        let v = p.to_vector();
        assert_eq!(v.len(), p.len());
        assert_eq!(ShapeParams::from_vector(&v, [2, 1, 3]).unwrap(), p);
        assert!(ShapeParams::from_vector(&v, [2, 2, 3]).is_err());
    }
}
