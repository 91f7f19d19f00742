use super::FaceShape;
use crate::error::{invalid, Result};

/// Uniform landmarking for self-occluded points.
///
/// Each invisible landmark `(x, y)` moves to where the horizontal line
/// `Y = y` crosses the outline polyline (landmarks `outline` in order). When
/// the line crosses several segments the crossing nearest in `x` wins; when
/// it crosses none, the nearest outline vertex is used. Visible landmarks
/// are left alone, so the landmark count is the same for every pose.
pub fn remap_occluded_landmarks(
    shape: &FaceShape,
    visible: &[bool],
    outline: &[usize],
) -> Result<FaceShape> {
    let l = shape.num_points();
    if visible.len() != l {
        return invalid(format!("{} visibility flags for {l} landmarks", visible.len()));
    }
    if outline.is_empty() {
        return invalid("outline must list at least one landmark");
    }
    if let Some(&k) = outline.iter().find(|&&k| k >= l) {
        return invalid(format!("outline index {k} out of range for {l} landmarks"));
    }
    let poly: Vec<(f64, f64)> = outline.iter().map(|&k| shape.point(k)).collect();
    let mut out = shape.clone();
    for (k, &vis) in visible.iter().enumerate() {
        if vis {
            continue;
        }
        let (x, y) = shape.point(k);
        let mut best: Option<f64> = None;
        for w in poly.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let (lo, hi) = (y0.min(y1), y0.max(y1));
            if y < lo || y > hi {
                continue;
            }
            let xi = if y1 == y0 {
                // horizontal segment on the line: nearest point of the segment
                x.clamp(x0.min(x1), x0.max(x1))
            } else {
                x0 + (y - y0) / (y1 - y0) * (x1 - x0)
            };
            if best.is_none_or(|b| (xi - x).abs() < (b - x).abs()) {
                best = Some(xi);
            }
        }
        let target = match best {
            Some(xi) => (xi, y),
            None => poly
                .iter()
                .copied()
                .min_by(|a, b| {
                    let da = (a.0 - x).powi(2) + (a.1 - y).powi(2);
                    let db = (b.0 - x).powi(2) + (b.1 - y).powi(2);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap(),
        };
        out.set_point(k, target);
    }
    Ok(out)
}

/// Euclidean distance from `p` to the polyline through `poly`.
pub fn point_polyline_distance(p: (f64, f64), poly: &[(f64, f64)]) -> f64 {
    if poly.len() == 1 {
        return ((p.0 - poly[0].0).powi(2) + (p.1 - poly[0].1).powi(2)).sqrt();
    }
    poly.windows(2)
        .map(|w| {
            let ((ax, ay), (bx, by)) = (w[0], w[1]);
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            ((p.0 - ax - t * dx).powi(2) + (p.1 - ay - t * dy).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}
