use crate::completion::{
    complete_cp_weighted, complete_tucker_power, initialize_missing, InitPolicy, InitRecord, MaskedTensor,
};
use crate::error::{invalid, Result};
use crate::tensor::{increment, DenseTensor};

/// Which samples of the `(identity, pose, illumination, expression)` grid
/// exist. Cells are ordered with the expression index fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleGrid {
    extents: [usize; 4],
    frontal: usize,
    present: Vec<bool>,
}

impl SampleGrid {
    pub fn new(extents: [usize; 4], frontal: usize, present: Vec<bool>) -> Result<Self> {
        if extents.contains(&0) {
            return invalid(format!("grid extents must be positive, got {extents:?}"));
        }
        if frontal >= extents[1] {
            return invalid(format!("frontal pose {frontal} out of range for {} poses", extents[1]));
        }
        let n: usize = extents.iter().product();
        if present.len() != n {
            return invalid(format!("{} presence flags for {n} cells", present.len()));
        }
        Ok(Self {
            extents,
            frontal,
            present,
        })
    }

    /// A grid with every cell present.
    pub fn complete(extents: [usize; 4], frontal: usize) -> Result<Self> {
        Self::new(extents, frontal, vec![true; extents.iter().product()])
    }

    pub fn extents(&self) -> [usize; 4] {
        self.extents
    }

    pub fn frontal(&self) -> usize {
        self.frontal
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn num_cells(&self) -> usize {
        self.present.len()
    }

    pub fn cell_index(&self, c: [usize; 4]) -> usize {
        let e = self.extents;
        ((c[0] * e[1] + c[1]) * e[2] + c[2]) * e[3] + c[3]
    }

    pub fn cell(&self, index: usize) -> [usize; 4] {
        let e = self.extents;
        let mut k = index;
        let ie = k % e[3];
        k /= e[3];
        let il = k % e[2];
        k /= e[2];
        let ip = k % e[1];
        [k / e[1], ip, il, ie]
    }

    pub fn is_present(&self, c: [usize; 4]) -> bool {
        self.present[self.cell_index(c)]
    }

    /// Fails when some pose index has no sample at all.
    pub fn check_poses(&self) -> Result<()> {
        for p in 0..self.extents[1] {
            let any = (0..self.num_cells()).any(|k| self.present[k] && self.cell(k)[1] == p);
            if !any {
                return invalid(format!("every sample of pose {p} is missing; the pose mode cannot be recovered"));
            }
        }
        Ok(())
    }
}

/// Solver used to complete missing samples after initialization.
#[derive(Debug, Clone, PartialEq)]
pub enum CompletionSolver {
    /// Keep the initialization as is.
    InitOnly,
    /// Tucker power iteration. `None` ranks use [`default_completion_ranks`].
    TuckerPower {
        shape_ranks: Option<[usize; 5]>,
        texture_ranks: Option<[usize; 5]>,
        max_iter: usize,
        tol: f64,
    },
    /// Weighted CP fitted by gradient descent.
    CpWopt { rank: usize, max_iter: usize, tol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionPolicy {
    pub init: InitPolicy,
    pub solver: CompletionSolver,
}

impl Default for CompletionPolicy {
    fn default() -> Self {
        Self {
            init: InitPolicy::VariationAware { seed: 0 },
            solver: CompletionSolver::TuckerPower {
                shape_ranks: None,
                texture_ranks: None,
                max_iter: 50,
                tol: 1e-6,
            },
        }
    }
}

/// Ranks `ceil(I_n / 2)` on the variation modes and the largest useful
/// rank on the feature mode.
pub fn default_completion_ranks(dims: &[usize]) -> [usize; 5] {
    let mut r = [1usize; 5];
    for n in 0..4 {
        r[n] = dims[n].div_ceil(2).max(1);
    }
    r[4] = dims[4].min(r[..4].iter().product());
    r
}

/// Centered 5-way shape and texture tensors with their means.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub shape: DenseTensor,
    pub texture: DenseTensor,
    pub mean_shape: Vec<f64>,
    pub mean_texture: Vec<f64>,
    /// How each missing sample was initialized.
    pub records: Vec<InitRecord>,
    pub shape_trace: Vec<f64>,
    pub texture_trace: Vec<f64>,
}

impl Assembled {
    /// Wraps tensors that are already centered.
    pub fn from_centered(
        shape: DenseTensor,
        texture: DenseTensor,
        mean_shape: Vec<f64>,
        mean_texture: Vec<f64>,
    ) -> Result<Self> {
        if shape.order() != 5 || texture.order() != 5 || shape.dims()[..4] != texture.dims()[..4] {
            return invalid(format!(
                "shape {:?} and texture {:?} tensors must be 5-way over the same grid",
                shape.dims(),
                texture.dims()
            ));
        }
        if mean_shape.len() != shape.dims()[4] || mean_texture.len() != texture.dims()[4] {
            return invalid("means do not match the feature modes");
        }
        Ok(Self {
            shape,
            texture,
            mean_shape,
            mean_texture,
            records: Vec::new(),
            shape_trace: Vec::new(),
            texture_trace: Vec::new(),
        })
    }
}

/// Stacks per-cell samples into 5-way tensors, completes the missing cells
/// and centers both tensors on the mean of the observed samples.
///
/// `shapes[k]` and `textures[k]` belong to `grid.cell(k)` and must be
/// `Some` exactly for present cells.
pub fn assemble_tensors(
    grid: &SampleGrid,
    shapes: &[Option<Vec<f64>>],
    textures: &[Option<Vec<f64>>],
    policy: &CompletionPolicy,
) -> Result<Assembled> {
    if shapes.len() != grid.num_cells() || textures.len() != grid.num_cells() {
        return invalid(format!(
            "{} shapes and {} textures for {} cells",
            shapes.len(),
            textures.len(),
            grid.num_cells()
        ));
    }
    grid.check_poses()?;
    for (k, &p) in grid.present().iter().enumerate() {
        if p != shapes[k].is_some() || p != textures[k].is_some() {
            return invalid(format!("cell {:?}: sample presence disagrees with the grid", grid.cell(k)));
        }
    }
    let (shape_tensor, shape_mean) = stack(grid, shapes, "shape")?;
    let (texture_tensor, texture_mean) = stack(grid, textures, "texture")?;
    let shape_masked = MaskedTensor::from_cells(shape_tensor, grid.present())?;
    let texture_masked = MaskedTensor::from_cells(texture_tensor, grid.present())?;

    let (shape_init, records) = initialize_missing(&shape_masked, policy.init)?;
    let (texture_init, _) = initialize_missing(&texture_masked, policy.init)?;
    let (shape, shape_trace) = complete(&shape_masked, &shape_init, &policy.solver, true)?;
    let (texture, texture_trace) = complete(&texture_masked, &texture_init, &policy.solver, false)?;
    Ok(Assembled {
        shape: center(shape, &shape_mean),
        texture: center(texture, &texture_mean),
        mean_shape: shape_mean,
        mean_texture: texture_mean,
        records,
        shape_trace,
        texture_trace,
    })
}

fn stack(grid: &SampleGrid, samples: &[Option<Vec<f64>>], what: &str) -> Result<(DenseTensor, Vec<f64>)> {
    let Some(d) = samples.iter().flatten().map(|s| s.len()).next() else {
        return invalid("the grid has no samples");
    };
    if d == 0 {
        return invalid(format!("{what} vectors are empty"));
    }
    let mut data = vec![0.0; grid.num_cells() * d];
    let mut mean = vec![0.0; d];
    let mut count = 0usize;
    for (k, s) in samples.iter().enumerate() {
        if let Some(s) = s {
            if s.len() != d {
                return invalid(format!(
                    "{what} at cell {:?} has length {}, expected {d}",
                    grid.cell(k),
                    s.len()
                ));
            }
            data[k * d..(k + 1) * d].copy_from_slice(s);
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
            count += 1;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let e = grid.extents();
    Ok((DenseTensor::new(vec![e[0], e[1], e[2], e[3], d], data)?, mean))
}

fn complete(
    x: &MaskedTensor,
    init: &DenseTensor,
    solver: &CompletionSolver,
    is_shape: bool,
) -> Result<(DenseTensor, Vec<f64>)> {
    if x.missing_count() == 0 {
        return Ok((x.data().clone(), Vec::new()));
    }
    match solver {
        CompletionSolver::InitOnly => Ok((init.clone(), Vec::new())),
        CompletionSolver::TuckerPower {
            shape_ranks,
            texture_ranks,
            max_iter,
            tol,
        } => {
            let ranks = if is_shape { shape_ranks } else { texture_ranks };
            let ranks = ranks.unwrap_or_else(|| default_completion_ranks(x.dims()));
            let c = complete_tucker_power(x, init, &ranks, *max_iter, *tol)?;
            Ok((c.tensor, c.trace))
        }
        CompletionSolver::CpWopt { rank, max_iter, tol } => {
            let c = complete_cp_weighted(x, init, *rank, *max_iter, *tol, true)?;
            Ok((c.tensor, c.trace))
        }
    }
}

fn center(mut x: DenseTensor, mean: &[f64]) -> DenseTensor {
    let d = mean.len();
    for chunk in x.as_mut_slice().chunks_exact_mut(d) {
        for (v, m) in chunk.iter_mut().zip(mean) {
            *v -= m;
        }
    }
    x
}

/// Iterates over all `(i, p, l, e)` cells in grid order.
pub fn grid_cells(extents: [usize; 4]) -> impl Iterator<Item = [usize; 4]> {
    let n: usize = extents.iter().product();
    let mut c = [0usize; 4];
    (0..n).map(move |_| {
        let out = c;
        increment(&mut c, &extents);
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cell_indexing_round_trips() {
        let g = SampleGrid::complete([3, 4, 2, 5], 1).unwrap();
        for (k, c) in grid_cells(g.extents()).enumerate() {
            assert_eq!(g.cell_index(c), k);
            assert_eq!(g.cell(k), c);
        }
    }

    #[test]
    fn complete_grid_is_centered_input() {
        let g = SampleGrid::complete([2, 2, 1, 1], 0).unwrap();
        let shapes: Vec<Option<Vec<f64>>> = (0..4).map(|k| Some(vec![k as f64, 2.0 * k as f64])).collect();
        let textures: Vec<Option<Vec<f64>>> = (0..4).map(|k| Some(vec![0.1 * k as f64; 3])).collect();
        let a = assemble_tensors(&g, &shapes, &textures, &CompletionPolicy::default()).unwrap();
        assert_eq!(a.shape.dims(), &[2, 2, 1, 1, 2]);
        assert_eq!(a.mean_shape, vec![1.5, 3.0]);
        for k in 0..4 {
            assert_eq!(a.shape.as_slice()[2 * k], k as f64 - 1.5);
        }
        assert!(a.records.is_empty());
    }

    #[test]
    fn missing_pose_is_rejected() {
        let g = SampleGrid::new([1, 2, 1, 1], 0, vec![true, false]).unwrap();
        let shapes = vec![Some(vec![1.0, 2.0]), None];
        let textures = vec![Some(vec![1.0]), None];
        assert!(assemble_tensors(&g, &shapes, &textures, &CompletionPolicy::default()).is_err());
    }

    #[test]
    fn single_missing_cell_recovered_on_multilinear_data() {
        // shape(i,p,l,e) = u_i * v_p + w_e, rank one in identity and pose
        let ext = [4, 3, 1, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 6;
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..1.5)).collect();
        let v: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let w: Vec<Vec<f64>> = (0..2).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let truth: Vec<Vec<f64>> = grid_cells(ext)
            .map(|c| (0..d).map(|k| u[c[0]] * v[c[1]][k] + w[c[3]][k]).collect())
            .collect();
        let grid_full = SampleGrid::complete(ext, 0).unwrap();
        let missing = grid_full.cell_index([2, 1, 0, 1]);
        let mut present = vec![true; truth.len()];
        present[missing] = false;
        let g = SampleGrid::new(ext, 0, present.clone()).unwrap();
        let shapes: Vec<Option<Vec<f64>>> = truth
            .iter()
            .zip(&present)
            .map(|(t, &p)| p.then(|| t.clone()))
            .collect();
        let policy = CompletionPolicy {
            init: InitPolicy::VariationAware { seed: 0 },
            solver: CompletionSolver::TuckerPower {
                shape_ranks: Some([2, 3, 1, 2, 6]),
                texture_ranks: Some([2, 3, 1, 2, 6]),
                max_iter: 2000,
                tol: 1e-15,
            },
        };
        let a = assemble_tensors(&g, &shapes, &shapes, &policy).unwrap();
        assert_eq!(a.records.len(), 1);
        assert_eq!(a.records[0].rule, crate::completion::InitRule::And);
        for k in 0..d {
            let got = a.shape.as_slice()[missing * d + k] + a.mean_shape[k];
            assert!((got - truth[missing][k]).abs() < 1e-5, "{got} vs {}", truth[missing][k]);
        }
    }
}
