//! Landmark shapes, similarity transforms, Procrustes alignment, the
//! reference mesh with its piecewise-affine warp, and the uniform landmarking
//! rule for self-occluded points.

mod mesh;
mod occlusion;
mod procrustes;
pub mod pts;
mod warp;

pub use mesh::{build_reference_mesh, LatticePixel, ReferenceMesh};
pub use occlusion::{point_polyline_distance, remap_occluded_landmarks};
pub use procrustes::{align_similarity, normalize_shape, procrustes_align, Procrustes};
pub use warp::{render_texture, warp_to_reference, Warp};

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// `L` landmarks stored as `[x_1, y_1, ..., x_L, y_L]` in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceShape {
    coords: Vec<f64>,
}

impl FaceShape {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return invalid(format!(
                "shape vector needs a positive even length, got {}",
                coords.len()
            ));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return invalid("shape coordinates must be finite");
        }
        Ok(Self { coords })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(points.iter().flat_map(|&(x, y)| [x, y]).collect())
    }

    pub fn num_points(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn point(&self, l: usize) -> (f64, f64) {
        (self.coords[2 * l], self.coords[2 * l + 1])
    }

    pub fn set_point(&mut self, l: usize, p: (f64, f64)) {
        self.coords[2 * l] = p.0;
        self.coords[2 * l + 1] = p.1;
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coords.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.num_points() as f64;
        let (sx, sy) = self.points().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        (sx / n, sy / n)
    }

    /// `sqrt(sum |p_l - centroid|^2)`.
    pub fn centroid_size(&self) -> f64 {
        let (cx, cy) = self.centroid();
        self.points()
            .map(|(x, y)| (x - cx).powi(2) + (y - cy).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.points().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), (x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            coords: self
                .coords
                .chunks_exact(2)
                .flat_map(|c| [c[0] + dx, c[1] + dy])
                .collect(),
        }
    }
}

/// Similarity transform `p -> scale * R(theta) p + (tx, ty)`.
///
/// Rotation is counter-clockwise in a y-up frame, which appears clockwise
/// on screen where y points down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub scale: f64,
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineParams {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        theta: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(scale: f64, theta: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return invalid(format!("scale must be positive, got {scale}"));
        }
        if !theta.is_finite() || !tx.is_finite() || !ty.is_finite() {
            return invalid("affine parameters must be finite");
        }
        Ok(Self {
            scale,
            theta: wrap_angle(theta),
            tx,
            ty,
        })
    }

    pub fn apply_point(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            self.scale * (c * x - s * y) + self.tx,
            self.scale * (s * x + c * y) + self.ty,
        )
    }

    pub fn inverse(&self) -> Self {
        let inv_s = 1.0 / self.scale;
        let (s, c) = (-self.theta).sin_cos();
        Self {
            scale: inv_s,
            theta: wrap_angle(-self.theta),
            tx: -inv_s * (c * self.tx - s * self.ty),
            ty: -inv_s * (s * self.tx + c * self.ty),
        }
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Self) -> Self {
        let (tx, ty) = self.apply_point((inner.tx, inner.ty));
        Self {
            scale: self.scale * inner.scale,
            theta: wrap_angle(self.theta + inner.theta),
            tx,
            ty,
        }
    }
}

/// Maps every point of `shape` through `g`.
pub fn apply_affine(shape: &FaceShape, g: &AffineParams) -> FaceShape {
    FaceShape {
        coords: shape
            .points()
            .flat_map(|p| {
                let (x, y) = g.apply_point(p);
                [x, y]
            })
            .collect(),
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}
