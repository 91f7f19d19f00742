//! Manifests, the synthetic dataset generator, and missing-sample masks.

mod manifest;
mod mask;
mod synthetic;

pub use manifest::{load_manifest, load_samples, DatasetManifest, LoadedSample, ManifestRow};
pub use mask::{make_missing_mask, mask_presence};
pub use synthetic::{
    generate_synthetic, SyntheticDataset, SyntheticFactors, SyntheticGenerator, SyntheticSample, SyntheticSpec,
    OCCLUSION_YAW_DEG,
};

use std::path::Path;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::pts::{write_pts, write_visibility};
use crate::model::grid_cells;

/// File stem of a cell, e.g. `i003_p2_l0_e1`.
pub fn cell_stem(cell: [usize; 4]) -> String {
    format!("i{:03}_p{}_l{}_e{}", cell[0], cell[1], cell[2], cell[3])
}

/// Renders every cell of `generator` into `dir` (`img/`, `pts/`) and writes
/// `dir/manifest.csv`. Cells are rendered in parallel on the current rayon
/// pool; the files do not depend on the pool size.
pub fn write_synthetic(dir: &Path, generator: &SyntheticGenerator) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir.join("img"))?;
    std::fs::create_dir_all(dir.join("pts"))?;
    let spec = generator.spec();
    let cells: Vec<[usize; 4]> = grid_cells(spec.extents).collect();
    let rows = cells
        .par_iter()
        .map(|&cell| {
            let (s, img) = generator.generate_cell(cell)?;
            let stem = cell_stem(cell);
            let row = ManifestRow {
                cell,
                image: format!("img/{stem}.pgm"),
                pts: format!("pts/{stem}.pts"),
                visibility: Some(format!("pts/{stem}.vis")),
            };
            img.save_pgm(dir.join(&row.image))?;
            write_pts(&dir.join(&row.pts), &s.shape)?;
            write_visibility(&dir.join(row.visibility.as_ref().unwrap()), &s.visible)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        extents: spec.extents,
        frontal: spec.frontal_pose(),
        rows,
    };
    manifest.save(dir.join("manifest.csv"))?;
    Ok(manifest)
}
