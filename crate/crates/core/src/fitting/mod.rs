//! Cascaded linear regression of shape parameters from local descriptors,
//! texture-parameter estimation, and landmark error metrics.
//!
//! Each stage maps the descriptor `f(I, p)` extracted at the current shape
//! to a parameter update `δp = A f + b`. Fitting needs no knowledge of the
//! pose, expression or illumination of the input image.

mod metrics;
mod regressor;
mod texture;

pub use metrics::{inter_ocular_distance, normalized_error, pt_pt_error};
pub use regressor::{default_lambda, stages_from_bytes, stages_to_bytes, train_weak, WeakRegressor};
pub use texture::{
    aam_fitting_objective, estimate_texture_params, estimate_texture_params_from, AamObjective, TextureEstimate,
};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::features::extract_features;
use crate::geometry::{align_similarity, apply_affine, wrap_angle, warp_to_reference, AffineParams, FaceShape};
use crate::image::GrayImage;
use crate::model::multilinear::als_project;
use crate::model::{ShapeParams, TextureParams, UtaamModel};

/// Chunk name of a serialized cascade inside a model file.
pub const CASCADE_CHUNK: &str = "CASC";

/// An ordered list of weak regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeRegressor {
    stages: Vec<WeakRegressor>,
}

impl CascadeRegressor {
    pub fn new(stages: Vec<WeakRegressor>) -> Result<Self> {
        let Some(first) = stages.first() else {
            return invalid("a cascade needs at least one stage");
        };
        let (np, nf) = (first.num_params(), first.num_features());
        if stages.iter().any(|s| s.num_params() != np || s.num_features() != nf) {
            return invalid("cascade stages disagree on dimensions");
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[WeakRegressor] {
        &self.stages
    }

    pub fn num_params(&self) -> usize {
        self.stages[0].num_params()
    }

    pub fn num_features(&self) -> usize {
        self.stages[0].num_features()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        stages_to_bytes(&self.stages)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::new(stages_from_bytes(bytes)?).map_err(|e| Error::Data(e.to_string()))
    }

    /// Checks that the cascade fits `model`.
    pub fn check_model(&self, model: &UtaamModel) -> Result<()> {
        let nf = model.hog().feature_len(model.num_points());
        if self.num_params() != model.num_shape_params() || self.num_features() != nf {
            return invalid(format!(
                "cascade maps {} features to {} parameters; model needs {nf} and {}",
                self.num_features(),
                self.num_params(),
                model.num_shape_params()
            ));
        }
        Ok(())
    }
}

/// Ground-truth shape parameters of an annotated shape.
///
/// Alternates between the similarity that best maps the current model
/// shape onto `truth` and one ALS round of the identity, pose and
/// expression coefficients against `truth` mapped back into the model
/// frame. Starts from the training rows of `cell = [i, p, l, e]` when
/// given, otherwise from the mean rows.
pub fn project_shape(model: &UtaamModel, truth: &FaceShape, cell: Option<[usize; 4]>, rounds: usize) -> Result<ShapeParams> {
    if truth.num_points() != model.num_points() {
        return invalid(format!(
            "shape has {} landmarks, model expects {}",
            truth.num_points(),
            model.num_points()
        ));
    }
    let mut p = match cell {
        Some([i, p, _, e]) => model.training_shape_params(i, p, e, AffineParams::IDENTITY)?,
        None => model.mean_shape_params(AffineParams::IDENTITY),
    };
    for _ in 0..rounds {
        let s = FaceShape::new(model.synthesize_shape_normalized(&p.a_i, &p.a_p, &p.a_e)?)?;
        let g = align_similarity(&s, truth)?;
        let target: Vec<f64> = apply_affine(truth, &g.inverse())
            .as_slice()
            .iter()
            .zip(model.mean_shape())
            .map(|(a, m)| a - m)
            .collect();
        let proj = als_project(model.shape_core(), &target, vec![p.a_i, p.a_p, p.a_e], 1)?;
        let [a_i, a_p, a_e] = <[Vec<f64>; 3]>::try_from(proj.coeffs).expect("three modes");
        p = ShapeParams {
            affine: g,
            a_i,
            a_p,
            a_e,
        };
    }
    let s = FaceShape::new(model.synthesize_shape_normalized(&p.a_i, &p.a_p, &p.a_e)?)?;
    p.affine = align_similarity(&s, truth)?;
    Ok(p)
}

/// Mean-row coefficients placed so the mean shape's bounding box is
/// centered on `(cx, cy)` with height `height`.
pub fn init_from_box(model: &UtaamModel, cx: f64, cy: f64, height: f64) -> Result<ShapeParams> {
    if !(height > 0.0) {
        return invalid(format!("box height must be positive, got {height}"));
    }
    let p = model.mean_shape_params(AffineParams::IDENTITY);
    let s = FaceShape::new(model.synthesize_shape_normalized(&p.a_i, &p.a_p, &p.a_e)?)?;
    let (x0, y0, x1, y1) = s.bounding_box();
    let scale = height / (y1 - y0).max(1e-12);
    let (mx, my) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    Ok(ShapeParams {
        affine: AffineParams::new(scale, 0.0, cx - scale * mx, cy - scale * my)?,
        ..p
    })
}

/// Mean-row coefficients with the mean shape's centroid at `(cx, cy)`,
/// no rotation and the given scale.
pub fn init_centered(model: &UtaamModel, cx: f64, cy: f64, scale: f64) -> Result<ShapeParams> {
    let p = model.mean_shape_params(AffineParams::IDENTITY);
    let s = FaceShape::new(model.synthesize_shape_normalized(&p.a_i, &p.a_p, &p.a_e)?)?;
    let (mx, my) = s.centroid();
    Ok(ShapeParams {
        affine: AffineParams::new(scale, 0.0, cx - scale * mx, cy - scale * my)?,
        ..p
    })
}

/// A training image with its annotated landmarks and, when known, its
/// grid cell `[i, p, l, e]`.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub image: GrayImage,
    pub truth: FaceShape,
    pub cell: Option<[usize; 4]>,
}

/// Random perturbation of a ground-truth similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    /// Scale factor drawn from `[1 - scale, 1 + scale]`.
    pub scale: f64,
    /// Rotation drawn from `[-rotation, rotation]` radians.
    pub rotation: f64,
    /// Translation drawn per axis from `[-t, t] * face size`.
    pub translation: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            scale: 0.1,
            rotation: 10f64.to_radians(),
            translation: 0.05,
        }
    }
}

impl Jitter {
    /// Applies the jitter to `g` for a face of the given size.
    pub fn apply(&self, g: &AffineParams, face_size: f64, rng: &mut ChaCha8Rng) -> AffineParams {
        let s = g.scale * (1.0 + rng.random_range(-self.scale..=self.scale));
        let r = g.theta + rng.random_range(-self.rotation..=self.rotation);
        let tx = g.tx + face_size * rng.random_range(-self.translation..=self.translation);
        let ty = g.ty + face_size * rng.random_range(-self.translation..=self.translation);
        AffineParams {
            scale: s,
            theta: wrap_angle(r),
            tx,
            ty,
        }
    }
}

/// Cascade training options.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of stages `M`.
    pub stages: usize,
    /// Fixed ridge weight; `None` uses [`default_lambda`] per stage.
    pub lambda: Option<f64>,
    /// Initializations per training image `K`.
    pub perturbations: usize,
    pub jitter: Jitter,
    /// ALS rounds when projecting annotations onto the model.
    pub projection_rounds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stages: 5,
            lambda: None,
            perturbations: 10,
            jitter: Jitter::default(),
            projection_rounds: 5,
            seed: 0,
        }
    }
}

/// Trained cascade plus diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedCascade {
    pub cascade: CascadeRegressor,
    /// Mean training pt-pt error at initialization and after every stage.
    pub errors: Vec<f64>,
    /// Step applied to each stage (1 unless the stage had to be damped).
    pub steps: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Trains a cascade of `config.stages` ridge regressors.
///
/// Every image gets `K` initial parameter vectors, alternating between the
/// mean coefficients under a jittered ground-truth similarity and another
/// image's ground-truth coefficients under a jittered similarity. Stage `m`
/// regresses `p* - p` from the descriptors at the current `p` and updates
/// every `p`. If a full update would raise the mean training error, the
/// stage is scaled by the largest power of one half (down to zero) that
/// does not, so the error trace never increases.
pub fn train_cascade(model: &UtaamModel, samples: &[TrainingSample], config: &TrainConfig) -> Result<TrainedCascade> {
    if samples.is_empty() {
        return invalid("empty training set");
    }
    if config.stages == 0 || config.perturbations == 0 {
        return invalid("need at least one stage and one perturbation");
    }
    let ranks = model.shape_ranks();
    let targets: Vec<ShapeParams> = samples
        .par_iter()
        .map(|s| project_shape(model, &s.truth, s.cell, config.projection_rounds))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut owners = Vec::new();
    let mut params: Vec<Vec<f64>> = Vec::new();
    for (n, s) in samples.iter().enumerate() {
        let (x0, y0, x1, y1) = s.truth.bounding_box();
        let size = (x1 - x0).max(y1 - y0);
        for k in 0..config.perturbations {
            let affine = config.jitter.apply(&targets[n].affine, size, &mut rng);
            let p = if k % 2 == 0 || samples.len() == 1 {
                model.mean_shape_params(affine)
            } else {
                let mut other = rng.random_range(0..samples.len() - 1);
                if other >= n {
                    other += 1;
                }
                ShapeParams {
                    affine,
                    ..targets[other].clone()
                }
            };
            owners.push(n);
            params.push(p.to_vector());
        }
    }
    let target_vecs: Vec<Vec<f64>> = owners.iter().map(|&n| targets[n].to_vector()).collect();
    let mean_error = |ps: &[Vec<f64>]| -> f64 {
        // collected first so the sum does not depend on the thread count
        let errs: Vec<f64> = ps
            .par_iter()
            .zip(owners.par_iter())
            .map(|(p, &n)| shape_error(model, p, ranks, &samples[n].truth))
            .collect();
        errs.iter().sum::<f64>() / ps.len() as f64
    };
    let mut errors = vec![mean_error(&params)];
    let mut stages = Vec::with_capacity(config.stages);
    let mut steps = Vec::new();
    let mut lambdas = Vec::new();
    for m in 0..config.stages {
        let feats = feature_matrix(model, samples, &owners, &params, ranks)
            .map_err(|e| Error::Numerical(format!("stage {}: {e}", m + 1)))?;
        let deltas = DMatrix::from_fn(params.len(), params[0].len(), |r, c| {
            param_delta(&target_vecs[r], &params[r], c)
        });
        let lambda = config.lambda.unwrap_or_else(|| default_lambda(&feats));
        let reg = train_weak(&feats, &deltas, lambda)?;
        let predicted = &feats * reg.a.transpose();
        let update = |step: f64| -> Vec<Vec<f64>> {
            params
                .iter()
                .enumerate()
                .map(|(r, p)| {
                    p.iter()
                        .enumerate()
                        .map(|(c, v)| v + step * (predicted[(r, c)] + reg.b[c]))
                        .collect()
                })
                .collect()
        };
        let prev = *errors.last().unwrap();
        let mut step = 1.0;
        let (mut next, mut err) = {
            let n = update(step);
            let e = mean_error(&n);
            (n, e)
        };
        while !(err <= prev) && step > 1.0 / 1024.0 {
            step *= 0.5;
            next = update(step);
            err = mean_error(&next);
        }
        if !(err <= prev) {
            step = 0.0;
            next = params.clone();
            err = prev;
        }
        stages.push(if step == 1.0 { reg } else { reg.scaled(step) });
        params = next;
        errors.push(err);
        steps.push(step);
        lambdas.push(lambda);
    }
    Ok(TrainedCascade {
        cascade: CascadeRegressor::new(stages)?,
        errors,
        steps,
        lambdas,
    })
}

/// `p*_c - p_c`, with the rotation difference wrapped into `(-pi, pi]`.
fn param_delta(target: &[f64], current: &[f64], c: usize) -> f64 {
    let d = target[c] - current[c];
    if c == 1 {
        wrap_angle(d)
    } else {
        d
    }
}

fn shape_error(model: &UtaamModel, p: &[f64], ranks: [usize; 3], truth: &FaceShape) -> f64 {
    ShapeParams::from_vector(p, ranks)
        .and_then(|sp| model.synthesize_shape(&sp))
        .and_then(|s| pt_pt_error(&s, truth))
        .unwrap_or(f64::INFINITY)
}

fn feature_matrix(
    model: &UtaamModel,
    samples: &[TrainingSample],
    owners: &[usize],
    params: &[Vec<f64>],
    ranks: [usize; 3],
) -> Result<DMatrix<f64>> {
    let nf = model.hog().feature_len(model.num_points());
    let rows: Vec<Vec<f64>> = params
        .par_iter()
        .zip(owners.par_iter())
        .map(|(p, &n)| {
            let shape = model.synthesize_shape(&ShapeParams::from_vector(p, ranks)?)?;
            extract_features(&samples[n].image, &shape, model.hog())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rows.len(), nf, |r, c| rows[r][c]))
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct Fit {
    pub shape_params: ShapeParams,
    pub texture_params: TextureParams,
    pub shape: FaceShape,
    /// Shape after each stage, starting with the initialization.
    pub trajectory: Vec<FaceShape>,
    pub texture_estimate_flagged: bool,
}

/// Runs the cascade from `init`, then estimates texture parameters from the
/// image texture warped at the final shape.
pub fn fit(image: &GrayImage, cascade: &CascadeRegressor, model: &UtaamModel, init: &ShapeParams, texture_rounds: usize) -> Result<Fit> {
    cascade.check_model(model)?;
    let ranks = model.shape_ranks();
    let mut p = init.to_vector();
    if p.len() != model.num_shape_params() {
        return invalid(format!(
            "initial parameters have length {}, model needs {}",
            p.len(),
            model.num_shape_params()
        ));
    }
    let mut shape = model.synthesize_shape(init)?;
    let mut trajectory = vec![shape.clone()];
    for (m, stage) in cascade.stages().iter().enumerate() {
        let f = extract_features(image, &shape, model.hog())?;
        let d = stage.apply(&f)?;
        p.iter_mut().zip(&d).for_each(|(v, dv)| *v += dv);
        let sp = ShapeParams::from_vector(&p, ranks)
            .map_err(|e| Error::Numerical(format!("stage {}: invalid parameters ({e})", m + 1)))?;
        shape = model.synthesize_shape(&sp)?;
        trajectory.push(shape.clone());
    }
    let shape_params = ShapeParams::from_vector(&p, ranks)?;
    let warp = warp_to_reference(image, &shape, model.mesh())?;
    let est = estimate_texture_params(&warp.texture, model, texture_rounds)?;
    Ok(Fit {
        shape_params,
        texture_params: est.params,
        shape,
        trajectory,
        texture_estimate_flagged: est.ridge_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_wraps_angles() {
        let t = [1.0, 3.0, 0.0];
        let c = [1.0, -3.0, 0.0];
        assert!((param_delta(&t, &c, 1) - (6.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(param_delta(&t, &c, 0), 0.0);
    }
}
