//! End-to-end model construction from annotated images.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::features::HogSpec;
use crate::geometry::{build_reference_mesh, procrustes_align, warp_to_reference, FaceShape};
use crate::image::GrayImage;
use crate::model::{assemble_tensors, build_utaam, full_ranks, CompletionPolicy, SampleGrid, UtaamModel, UtaamRanks};

/// Model construction options.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    /// Bounding-box height of the reference shape in pixels.
    pub reference_height: f64,
    pub hog: HogSpec,
    /// Shape model ranks; `None` keeps every mode at full rank.
    pub shape_ranks: Option<[usize; 5]>,
    /// Texture model ranks; `None` keeps every mode at full rank.
    pub texture_ranks: Option<[usize; 5]>,
    pub completion: CompletionPolicy,
    pub procrustes_iter: usize,
    pub procrustes_tol: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            reference_height: 48.0,
            hog: HogSpec::default(),
            shape_ranks: None,
            texture_ranks: None,
            completion: CompletionPolicy::default(),
            procrustes_iter: 100,
            procrustes_tol: 1e-10,
        }
    }
}

/// A built model plus construction diagnostics.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: UtaamModel,
    /// Mean scale of the similarities removed by Procrustes alignment,
    /// i.e. the typical size of a face in the training images.
    pub mean_scale: f64,
    pub shape_trace: Vec<f64>,
    pub texture_trace: Vec<f64>,
}

/// Builds a model from annotated samples.
///
/// `shapes[k]` holds the cell and image-coordinate landmarks of sample `k`
/// and `image(k)` returns its raster. Images are requested once each, in
/// parallel, and dropped after their texture is warped to the reference
/// mesh. Shapes are Procrustes-aligned before they enter the shape tensor.
pub fn build_model<F>(
    extents: [usize; 4],
    frontal: usize,
    shapes: &[([usize; 4], FaceShape)],
    image: F,
    config: &BuildConfig,
) -> Result<BuiltModel>
where
    F: Fn(usize) -> Result<GrayImage> + Sync,
{
    config.hog.validate()?;
    let mut present = vec![false; extents.iter().product()];
    let grid0 = SampleGrid::new(extents, frontal, present.clone())?;
    for (cell, _) in shapes {
        if cell.iter().zip(&extents).any(|(c, e)| c >= e) {
            return invalid(format!("cell {cell:?} outside extents {extents:?}"));
        }
        let k = grid0.cell_index(*cell);
        if present[k] {
            return invalid(format!("duplicate cell {cell:?}"));
        }
        present[k] = true;
    }
    let grid = SampleGrid::new(extents, frontal, present)?;
    grid.check_poses()?;
    let frontal_shapes: Vec<FaceShape> =
        shapes.iter().filter(|(c, _)| c[1] == frontal).map(|(_, s)| s.clone()).collect();
    if frontal_shapes.is_empty() {
        return invalid(format!("no sample at the frontal pose {frontal}"));
    }
    let mesh = build_reference_mesh(&frontal_shapes, config.reference_height)?;
    let all: Vec<FaceShape> = shapes.iter().map(|(_, s)| s.clone()).collect();
    let (aligned, mean_scale) = if all.len() >= 2 {
        let pa = procrustes_align(&all, config.procrustes_iter, config.procrustes_tol)?;
        let scale = pa.transforms.iter().map(|t| t.scale).sum::<f64>() / all.len() as f64;
        (pa.aligned, scale)
    } else {
        let s = crate::geometry::normalize_shape(&all[0])?;
        (vec![s], all[0].centroid_size())
    };
    let textures: Vec<Vec<f64>> = (0..shapes.len())
        .into_par_iter()
        .map(|k| Ok(warp_to_reference(&image(k)?, &shapes[k].1, &mesh)?.texture))
        .collect::<Result<_>>()?;
    let n = grid.num_cells();
    let mut shape_cells: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut texture_cells: Vec<Option<Vec<f64>>> = vec![None; n];
    for (k, ((cell, _), t)) in shapes.iter().zip(textures).enumerate() {
        let idx = grid.cell_index(*cell);
        shape_cells[idx] = Some(aligned[k].as_slice().to_vec());
        texture_cells[idx] = Some(t);
    }
    let assembled = assemble_tensors(&grid, &shape_cells, &texture_cells, &config.completion)?;
    let ranks = UtaamRanks {
        shape: config.shape_ranks.unwrap_or_else(|| full_ranks(assembled.shape.dims())),
        texture: config.texture_ranks.unwrap_or_else(|| full_ranks(assembled.texture.dims())),
    };
    let model = build_utaam(&assembled, &ranks, mesh, config.hog)?;
    Ok(BuiltModel {
        model,
        mean_scale,
        shape_trace: assembled.shape_trace.clone(),
        texture_trace: assembled.texture_trace.clone(),
    })
}
