use super::{procrustes_align, FaceShape};
use crate::error::{invalid, Result};

/// Tolerance on barycentric coordinates when testing pixel membership.
const INSIDE_EPS: f64 = 1e-9;

/// A lattice pixel of the reference frame, with its owning triangle and
/// barycentric coordinates within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePixel {
    pub x: i64,
    pub y: i64,
    pub triangle: usize,
    pub bary: [f64; 3],
}

/// Reference shape, its Delaunay triangulation, and the integer pixel
/// lattice covered by the triangulation in raster order. The lattice length
/// is the texture dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMesh {
    reference: FaceShape,
    triangles: Vec<[usize; 3]>,
    lattice: Vec<LatticePixel>,
}

impl ReferenceMesh {
    /// Rebuilds the lattice for a given reference shape and triangle list.
    pub fn from_parts(reference: FaceShape, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let l = reference.num_points();
        if triangles.is_empty() {
            return invalid("reference mesh has no triangles");
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&v| v >= l)) {
            return invalid(format!("triangle {t:?} references a landmark beyond {l}"));
        }
        let lattice = enumerate_lattice(&reference, &triangles);
        if lattice.is_empty() {
            return invalid("reference mesh covers no pixels");
        }
        Ok(Self {
            reference,
            triangles,
            lattice,
        })
    }

    pub fn reference(&self) -> &FaceShape {
        &self.reference
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn lattice(&self) -> &[LatticePixel] {
        &self.lattice
    }

    /// Texture dimensionality `I_t`.
    pub fn texture_len(&self) -> usize {
        self.lattice.len()
    }

    pub fn num_points(&self) -> usize {
        self.reference.num_points()
    }

    /// Raster extent `(width, height)` that contains every lattice pixel.
    pub fn extent(&self) -> (usize, usize) {
        let w = self.lattice.iter().map(|p| p.x).max().unwrap_or(0) + 1;
        let h = self.lattice.iter().map(|p| p.y).max().unwrap_or(0) + 1;
        (w as usize, h as usize)
    }

    /// Lowest-index triangle containing `(x, y)` and the barycentric
    /// coordinates there.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        locate_in(&self.reference, &self.triangles, x, y)
    }
}

/// Reference mesh from frontal shapes.
///
/// The reference shape is the Procrustes mean of the frontal shapes (a
/// single shape is used as is), rescaled so that its bounding box is
/// `target_height` pixels tall and translated so the box starts at the
/// origin. It is triangulated once; all poses share the triangulation.
pub fn build_reference_mesh(frontal: &[FaceShape], target_height: f64) -> Result<ReferenceMesh> {
    let base = match frontal.len() {
        0 => return invalid("need at least one frontal shape"),
        1 => frontal[0].clone(),
        _ => procrustes_align(frontal, 100, 1e-10)?.mean,
    };
    if !(target_height > 0.0) {
        return invalid(format!("target height must be positive, got {target_height}"));
    }
    let (x0, y0, _, y1) = base.bounding_box();
    if !(y1 - y0 > 1e-12) {
        return invalid("mean shape has zero height");
    }
    let s = target_height / (y1 - y0);
    let reference = FaceShape::from_points(
        &base
            .points()
            .map(|(x, y)| ((x - x0) * s, (y - y0) * s))
            .collect::<Vec<_>>(),
    )?;
    let triangles = delaunay(&reference)?;
    ReferenceMesh::from_parts(reference, triangles)
}

/// Delaunay triangulation with each triangle rotated to start at its lowest
/// vertex index and the list sorted, so the output is independent of the
/// triangulator's internal ordering.
fn delaunay(shape: &FaceShape) -> Result<Vec<[usize; 3]>> {
    if shape.num_points() < 3 {
        return invalid("triangulation needs at least 3 landmarks");
    }
    let pts: Vec<delaunator::Point> = shape
        .points()
        .map(|(x, y)| delaunator::Point { x, y })
        .collect();
    let tri = delaunator::triangulate(&pts);
    if tri.triangles.is_empty() {
        return invalid("mean shape is collinear; cannot triangulate");
    }
    let mut out: Vec<[usize; 3]> = tri
        .triangles
        .chunks_exact(3)
        .map(|t| {
            let k = (0..3).min_by_key(|&i| t[i]).unwrap();
            [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

pub(crate) fn barycentric(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    p: (f64, f64),
) -> Option<[f64; 3]> {
    let det = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    if det.abs() < 1e-300 {
        return None;
    }
    let l1 = ((p.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (p.1 - a.1)) / det;
    let l2 = ((b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1)) / det;
    Some([1.0 - l1 - l2, l1, l2])
}

fn locate_in(shape: &FaceShape, triangles: &[[usize; 3]], x: f64, y: f64) -> Option<(usize, [f64; 3])> {
    triangles.iter().enumerate().find_map(|(k, t)| {
        let w = barycentric(shape.point(t[0]), shape.point(t[1]), shape.point(t[2]), (x, y))?;
        w.iter().all(|&v| v >= -INSIDE_EPS).then_some((k, w))
    })
}

fn enumerate_lattice(shape: &FaceShape, triangles: &[[usize; 3]]) -> Vec<LatticePixel> {
    let (x0, y0, x1, y1) = shape.bounding_box();
    let mut out = Vec::new();
    for y in (y0.floor() as i64)..=(y1.ceil() as i64) {
        for x in (x0.floor() as i64)..=(x1.ceil() as i64) {
            if let Some((triangle, bary)) = locate_in(shape, triangles, x as f64, y as f64) {
                out.push(LatticePixel { x, y, triangle, bary });
            }
        }
    }
    out
}
