use super::{apply_affine, AffineParams, FaceShape};
use crate::error::{invalid, Result};
use crate::linalg::sym_eigen_desc;

/// Output of generalized Procrustes analysis.
///
/// `transforms[k]` maps `aligned[k]` back onto the k-th input shape, i.e. it
/// is the similarity removed from that shape.
#[derive(Debug, Clone)]
pub struct Procrustes {
    pub aligned: Vec<FaceShape>,
    pub mean: FaceShape,
    pub transforms: Vec<AffineParams>,
    pub iterations: usize,
}

/// Least-squares similarity taking `src` onto `dst` (same landmark count).
pub fn align_similarity(src: &FaceShape, dst: &FaceShape) -> Result<AffineParams> {
    if src.num_points() != dst.num_points() {
        return invalid(format!(
            "cannot align {} landmarks onto {}",
            src.num_points(),
            dst.num_points()
        ));
    }
    let (sx, sy) = src.centroid();
    let (dx, dy) = dst.centroid();
    let (mut a, mut b, mut norm) = (0.0, 0.0, 0.0);
    for ((x, y), (u, v)) in src.points().zip(dst.points()) {
        let (x, y, u, v) = (x - sx, y - sy, u - dx, v - dy);
        a += x * u + y * v;
        b += x * v - y * u;
        norm += x * x + y * y;
    }
    if norm <= 1e-24 {
        return invalid("degenerate shape: all landmarks coincide");
    }
    let (a, b) = (a / norm, b / norm);
    let scale = (a * a + b * b).sqrt();
    if scale <= 0.0 {
        return invalid("degenerate target shape: all landmarks coincide");
    }
    let theta = b.atan2(a);
    let partial = AffineParams::new(scale, theta, 0.0, 0.0)?;
    let (rx, ry) = partial.apply_point((sx, sy));
    AffineParams::new(scale, theta, dx - rx, dy - ry)
}

/// Centers a shape, scales it to unit centroid size and rotates it into its
/// principal-axes frame: the largest-variance axis along `y`, oriented so
/// that the third moment along `y` is non-negative. The result depends only
/// on the shape up to similarity.
pub fn normalize_shape(shape: &FaceShape) -> Result<FaceShape> {
    let size = shape.centroid_size();
    if !(size > 1e-12) {
        return invalid("degenerate shape: all landmarks coincide");
    }
    let (cx, cy) = shape.centroid();
    let centered: Vec<(f64, f64)> = shape
        .points()
        .map(|(x, y)| ((x - cx) / size, (y - cy) / size))
        .collect();
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &centered {
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let cov = nalgebra::DMatrix::from_row_slice(2, 2, &[sxx, sxy, sxy, syy]);
    let (_, vecs) = sym_eigen_desc(cov);
    let (ex, ey) = (vecs[(0, 0)], vecs[(1, 0)]);
    // rotate the major axis onto +y
    let phi = std::f64::consts::FRAC_PI_2 - ey.atan2(ex);
    let rot = AffineParams::new(1.0, phi, 0.0, 0.0)?;
    let mut out: Vec<(f64, f64)> = centered.iter().map(|&p| rot.apply_point(p)).collect();
    let skew: f64 = out.iter().map(|&(_, y)| y * y * y).sum();
    if skew < 0.0 {
        out.iter_mut().for_each(|p| *p = (-p.0, -p.1));
    }
    FaceShape::from_points(&out)
}

/// Generalized Procrustes analysis.
///
/// Starting from the first shape, every shape is aligned to the running
/// mean by a similarity transform; the mean is re-estimated and normalized
/// (zero centroid, unit centroid size, canonical orientation) until it moves
/// by less than `tol` or `max_iter` iterations have run.
pub fn procrustes_align(shapes: &[FaceShape], max_iter: usize, tol: f64) -> Result<Procrustes> {
    if shapes.len() < 2 {
        return invalid(format!("Procrustes needs at least 2 shapes, got {}", shapes.len()));
    }
    let l = shapes[0].num_points();
    if let Some(s) = shapes.iter().find(|s| s.num_points() != l) {
        return invalid(format!(
            "all shapes need {l} landmarks, found one with {}",
            s.num_points()
        ));
    }
    if shapes.iter().any(|s| !(s.centroid_size() > 1e-12)) {
        return invalid("degenerate shape: all landmarks coincide");
    }
    let mut mean = normalize_shape(&shapes[0])?;
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut acc = vec![0.0; 2 * l];
        for s in shapes {
            let g = align_similarity(s, &mean)?;
            for (a, v) in acc.iter_mut().zip(apply_affine(s, &g).as_slice()) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= shapes.len() as f64);
        let next = normalize_shape(&FaceShape::new(acc)?)?;
        let change = next
            .as_slice()
            .iter()
            .zip(mean.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        mean = next;
        if change < tol {
            break;
        }
    }
    let mut aligned = Vec::with_capacity(shapes.len());
    let mut transforms = Vec::with_capacity(shapes.len());
    for s in shapes {
        let g = align_similarity(s, &mean)?;
        aligned.push(apply_affine(s, &g));
        transforms.push(g.inverse());
    }
    Ok(Procrustes {
        aligned,
        mean,
        transforms,
        iterations,
    })
}
