//! HOG-style local descriptors sampled around each landmark.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::FaceShape;
use crate::image::GrayImage;

/// Descriptor hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogSpec {
    pub patch: usize,
    pub cell: usize,
    pub bins: usize,
    pub eps: f64,
}

impl Default for HogSpec {
    fn default() -> Self {
        Self {
            patch: 32,
            cell: 8,
            bins: 9,
            eps: 1e-6,
        }
    }
}

impl HogSpec {
    pub fn new(patch: usize, cell: usize, bins: usize, eps: f64) -> Result<Self> {
        let spec = Self { patch, cell, bins, eps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell == 0 || self.patch == 0 || !self.patch.is_multiple_of(self.cell) {
            return invalid(format!(
                "patch side {} must be a positive multiple of cell side {}",
                self.patch, self.cell
            ));
        }
        if self.bins < 2 {
            return invalid(format!("need at least 2 orientation bins, got {}", self.bins));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return invalid(format!("epsilon must be finite and non-negative, got {}", self.eps));
        }
        Ok(())
    }

    pub fn cells_per_side(&self) -> usize {
        self.patch / self.cell
    }

    /// Descriptor length for one landmark.
    pub fn landmark_len(&self) -> usize {
        self.bins * self.cells_per_side().pow(2)
    }

    /// `N_f` for a shape with `num_points` landmarks.
    pub fn feature_len(&self, num_points: usize) -> usize {
        num_points * self.landmark_len()
    }
}

/// Concatenated per-landmark descriptors, `spec.feature_len(L)` values.
///
/// Each patch is `patch x patch` pixels centered on the rounded landmark
/// with edge-clamped reads. Gradients are centered differences; every pixel
/// adds its gradient magnitude to one unsigned orientation bin of its cell.
/// The patch descriptor `v` is scaled to `v / sqrt(|v|^2 + eps^2)`.
pub fn extract_features(image: &GrayImage, shape: &FaceShape, spec: &HogSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.landmark_len();
    let mut out = vec![0.0; spec.feature_len(shape.num_points())];
    out.par_chunks_mut(n)
        .enumerate()
        .for_each(|(l, chunk)| landmark_descriptor(image, shape.point(l), spec, chunk));
    Ok(out)
}

fn landmark_descriptor(image: &GrayImage, (x, y): (f64, f64), spec: &HogSpec, out: &mut [f64]) {
    let half = (spec.patch / 2) as i64;
    let x0 = (x + 0.5).floor() as i64 - half;
    let y0 = (y + 0.5).floor() as i64 - half;
    let cps = spec.cells_per_side();
    let bin_width = std::f64::consts::PI / spec.bins as f64;
    for v in 0..spec.patch {
        for u in 0..spec.patch {
            let (px, py) = (x0 + u as i64, y0 + v as i64);
            let gx = image.get_clamped(px + 1, py) - image.get_clamped(px - 1, py);
            let gy = image.get_clamped(px, py + 1) - image.get_clamped(px, py - 1);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            let bin = ((theta / bin_width) as usize).min(spec.bins - 1);
            let cell = (v / spec.cell) * cps + u / spec.cell;
            out[cell * spec.bins + bin] += mag;
        }
    }
    let norm = (out.iter().map(|a| a * a).sum::<f64>() + spec.eps * spec.eps).sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|a| *a /= norm);
    }
}
