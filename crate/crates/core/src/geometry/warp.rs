use super::mesh::barycentric;
use super::{FaceShape, ReferenceMesh};
use crate::error::{invalid, Result};
use crate::image::GrayImage;

/// Source triangles with less area than this are treated as degenerate.
const MIN_TRIANGLE_AREA: f64 = 1e-9;

/// A shape-free texture plus diagnostics from the warp.
#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    pub texture: Vec<f64>,
    /// Number of source triangles skipped (their pixels are 0).
    pub degenerate_triangles: usize,
    /// Number of lattice pixels whose source position fell outside the image.
    pub clamped_samples: usize,
}

/// Piecewise-affine warp of the image region inside `shape` onto the
/// reference lattice, sampled bilinearly with edge clamping.
pub fn warp_to_reference(image: &GrayImage, shape: &FaceShape, mesh: &ReferenceMesh) -> Result<Warp> {
    if shape.num_points() != mesh.num_points() {
        return invalid(format!(
            "shape has {} landmarks, mesh expects {}",
            shape.num_points(),
            mesh.num_points()
        ));
    }
    let degenerate: Vec<bool> = mesh
        .triangles()
        .iter()
        .map(|t| triangle_area(shape.point(t[0]), shape.point(t[1]), shape.point(t[2])) < MIN_TRIANGLE_AREA)
        .collect();
    let mut texture = Vec::with_capacity(mesh.texture_len());
    let mut clamped_samples = 0;
    for p in mesh.lattice() {
        if degenerate[p.triangle] {
            texture.push(0.0);
            continue;
        }
        let t = mesh.triangles()[p.triangle];
        let (mut sx, mut sy) = (0.0, 0.0);
        for (k, &v) in t.iter().enumerate() {
            let (x, y) = shape.point(v);
            sx += p.bary[k] * x;
            sy += p.bary[k] * y;
        }
        let s = image.bilinear(sx, sy);
        clamped_samples += s.clamped as usize;
        texture.push(s.value);
    }
    Ok(Warp {
        texture,
        degenerate_triangles: degenerate.iter().filter(|&&d| d).count(),
        clamped_samples,
    })
}

/// Renders a texture vector into a `width x height` image inside `shape`.
///
/// Each pixel inside the shape's triangulation is mapped back to the
/// reference frame and the texture, viewed as a raster over the reference
/// lattice, is sampled bilinearly there. Pixels outside the shape, or whose
/// bilinear support leaves the lattice, take the nearest lattice value's
/// contribution from `background`.
pub fn render_texture(
    texture: &[f64],
    shape: &FaceShape,
    mesh: &ReferenceMesh,
    width: usize,
    height: usize,
    background: f64,
) -> Result<GrayImage> {
    if texture.len() != mesh.texture_len() {
        return invalid(format!(
            "texture has {} entries, mesh lattice has {}",
            texture.len(),
            mesh.texture_len()
        ));
    }
    if shape.num_points() != mesh.num_points() {
        return invalid("shape and mesh landmark counts differ");
    }
    let (rw, rh) = mesh.extent();
    let mut raster: Vec<Option<f64>> = vec![None; rw * rh];
    for (p, &v) in mesh.lattice().iter().zip(texture) {
        if p.x >= 0 && p.y >= 0 {
            raster[p.y as usize * rw + p.x as usize] = Some(v);
        }
    }
    let lookup = |x: i64, y: i64| -> Option<f64> {
        if x < 0 || y < 0 || x as usize >= rw || y as usize >= rh {
            return None;
        }
        raster[y as usize * rw + x as usize]
    };
    let reference = mesh.reference();
    let tris = mesh.triangles();
    let mut img = GrayImage::filled(width, height, background as f32)?;
    let (bx0, by0, bx1, by1) = shape.bounding_box();
    let ys = (by0.floor().max(0.0) as usize)..=(by1.ceil().min(height as f64 - 1.0).max(0.0) as usize);
    for y in ys {
        for x in (bx0.floor().max(0.0) as usize)..=(bx1.ceil().min(width as f64 - 1.0).max(0.0) as usize) {
            let p = (x as f64, y as f64);
            let hit = tris.iter().find_map(|t| {
                let w = barycentric(shape.point(t[0]), shape.point(t[1]), shape.point(t[2]), p)?;
                w.iter().all(|&v| v >= -1e-9).then_some((t, w))
            });
            let Some((t, w)) = hit else { continue };
            let (mut u, mut v) = (0.0, 0.0);
            for k in 0..3 {
                let (rx, ry) = reference.point(t[k]);
                u += w[k] * rx;
                v += w[k] * ry;
            }
            let (u0, v0) = (u.floor(), v.floor());
            let (fu, fv) = (u - u0, v - v0);
            let (iu, iv) = (u0 as i64, v0 as i64);
            let mut acc = 0.0;
            let mut weight = 0.0;
            for (dx, dy, wt) in [
                (0, 0, (1.0 - fu) * (1.0 - fv)),
                (1, 0, fu * (1.0 - fv)),
                (0, 1, (1.0 - fu) * fv),
                (1, 1, fu * fv),
            ] {
                if wt == 0.0 {
                    continue;
                }
                if let Some(val) = lookup(iu + dx, iv + dy) {
                    acc += wt * val;
                    weight += wt;
                }
            }
            if weight > 0.0 {
                img.pixels_mut()[y * width + x] = (acc / weight) as f32;
            }
        }
    }
    Ok(img)
}

fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs()
}
