use crate::error::{invalid, Result};
use crate::geometry::FaceShape;

/// Mean Euclidean distance between corresponding landmarks, in pixels.
pub fn pt_pt_error(predicted: &FaceShape, truth: &FaceShape) -> Result<f64> {
    if predicted.num_points() != truth.num_points() {
        return invalid(format!(
            "shapes have {} and {} landmarks",
            predicted.num_points(),
            truth.num_points()
        ));
    }
    let sum: f64 = predicted
        .points()
        .zip(truth.points())
        .map(|((x, y), (u, v))| (x - u).hypot(y - v))
        .sum();
    Ok(sum / truth.num_points() as f64)
}

/// [`pt_pt_error`] divided by the distance between the centroids of the
/// two eye landmark sets of `truth`.
pub fn normalized_error(predicted: &FaceShape, truth: &FaceShape, left_eye: &[usize], right_eye: &[usize]) -> Result<f64> {
    let iod = inter_ocular_distance(truth, left_eye, right_eye)?;
    Ok(pt_pt_error(predicted, truth)? / iod)
}

pub fn inter_ocular_distance(shape: &FaceShape, left_eye: &[usize], right_eye: &[usize]) -> Result<f64> {
    let centroid = |set: &[usize], name: &str| -> Result<(f64, f64)> {
        if set.is_empty() {
            return invalid(format!("{name} eye index set is empty"));
        }
        if let Some(&k) = set.iter().find(|&&k| k >= shape.num_points()) {
            return invalid(format!("{name} eye index {k} out of range"));
        }
        let (sx, sy) = set.iter().map(|&k| shape.point(k)).fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        Ok((sx / set.len() as f64, sy / set.len() as f64))
    };
    let (l, r) = (centroid(left_eye, "left")?, centroid(right_eye, "right")?);
    let d = (l.0 - r.0).hypot(l.1 - r.1);
    if !(d > 0.0) {
        return invalid("inter-ocular distance is zero");
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_shape(rng: &mut ChaCha8Rng, l: usize) -> FaceShape {
        FaceShape::new((0..2 * l).map(|_| rng.random_range(-100.0..100.0)).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let a = FaceShape::from_points(&[(0.0, 0.0), (50.0, 0.0), (25.0, 40.0)]).unwrap();
        assert_eq!(pt_pt_error(&a, &a).unwrap(), 0.0);
        let b = a.translate(3.0, 4.0);
        assert!((pt_pt_error(&b, &a).unwrap() - 5.0).abs() < 1e-12);
        assert!((normalized_error(&b, &a, &[0], &[1]).unwrap() - 0.1).abs() < 1e-12);
        assert!(normalized_error(&b, &a, &[], &[1]).is_err());
        assert!(normalized_error(&b, &a, &[0], &[0]).is_err());
        let short = FaceShape::from_points(&[(0.0, 0.0)]).unwrap();
        assert!(pt_pt_error(&short, &a).is_err());
    }

    #[test]
    fn loop_oracle_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (p, t) = (random_shape(&mut rng, 11), random_shape(&mut rng, 11));
            let mut sum = 0.0;
            for k in 0..11 {
                let dx = p.as_slice()[2 * k] - t.as_slice()[2 * k];
                let dy = p.as_slice()[2 * k + 1] - t.as_slice()[2 * k + 1];
                sum += (dx * dx + dy * dy).sqrt();
            }
            assert!((pt_pt_error(&p, &t).unwrap() - sum / 11.0).abs() < 1e-12);
            let n = normalized_error(&p, &t, &[0, 1], &[5, 6]).unwrap();
            let c = rng.random_range(0.1..10.0);
            let scale = |s: &FaceShape| FaceShape::new(s.as_slice().iter().map(|v| v * c).collect()).unwrap();
            let n2 = normalized_error(&scale(&p), &scale(&t), &[0, 1], &[5, 6]).unwrap();
            assert!((n - n2).abs() < 1e-12 * n.max(1.0));
        }
    }
}
