use crate::error::{invalid, Result};
use crate::geometry::{warp_to_reference, FaceShape, ReferenceMesh};
use crate::image::GrayImage;
use crate::model::multilinear::als_project;
use crate::model::{PcaAamModel, TextureParams, UtaamModel};

/// Result of [`estimate_texture_params`].
#[derive(Debug, Clone)]
pub struct TextureEstimate {
    pub params: TextureParams,
    /// Residual norm after every single-mode update.
    pub trace: Vec<f64>,
    /// Set when some per-mode system needed the ridge fallback.
    pub ridge_fallback: bool,
}

/// Texture parameters by alternating least squares over the identity,
/// pose, illumination and expression modes, starting from the mean rows of
/// the texture mode matrices. `rounds` full cycles are run.
pub fn estimate_texture_params(texture: &[f64], model: &UtaamModel, rounds: usize) -> Result<TextureEstimate> {
    estimate_texture_params_from(texture, model, model.mean_texture_params(), rounds)
}

/// [`estimate_texture_params`] from an explicit starting point.
pub fn estimate_texture_params_from(
    texture: &[f64],
    model: &UtaamModel,
    init: TextureParams,
    rounds: usize,
) -> Result<TextureEstimate> {
    if texture.len() != model.texture_len() {
        return invalid(format!(
            "texture has {} entries, model expects {}",
            texture.len(),
            model.texture_len()
        ));
    }
    let target: Vec<f64> = texture.iter().zip(model.mean_texture()).map(|(t, m)| t - m).collect();
    let p = als_project(
        model.texture_core(),
        &target,
        vec![init.b_i, init.b_p, init.b_l, init.b_e],
        rounds,
    )?;
    let [b_i, b_p, b_l, b_e] = <[Vec<f64>; 4]>::try_from(p.coeffs).expect("four modes");
    Ok(TextureEstimate {
        params: TextureParams { b_i, b_p, b_l, b_e },
        trace: p.trace,
        ridge_fallback: p.ridge_fallback,
    })
}

/// Value of the classical AAM objective and warp diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AamObjective {
    pub value: f64,
    /// Reference pixels whose source position fell outside the image.
    pub clamped_samples: usize,
}

/// `|mean_t + sum_k β_k t_k - W(I, α)|^2`, where `W` warps the image
/// texture inside the shape `mean_s + sum_k α_k s_k` (image coordinates)
/// onto `mesh`.
pub fn aam_fitting_objective(
    image: &GrayImage,
    model: &PcaAamModel,
    alpha: &[f64],
    beta: &[f64],
    mesh: &ReferenceMesh,
) -> Result<AamObjective> {
    let shape = FaceShape::new(model.shape.synthesize(alpha)?)?;
    let warp = warp_to_reference(image, &shape, mesh)?;
    let t = model.texture.synthesize(beta)?;
    if t.len() != warp.texture.len() {
        return invalid(format!(
            "texture model has {} entries, mesh lattice has {}",
            t.len(),
            warp.texture.len()
        ));
    }
    let value = t.iter().zip(&warp.texture).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(AamObjective {
        value,
        clamped_samples: warp.clamped_samples,
    })
}
