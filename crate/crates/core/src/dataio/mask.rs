use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::grid_cells;
use crate::tensor::DenseTensor;

/// A 0/1 tensor over the `(i, p, l, e)` grid with exactly
/// `round(fraction * cells)` zero cells.
///
/// Cells are visited in a seeded random order and removed unless they are
/// the last remaining sample of their pose.
pub fn make_missing_mask(extents: [usize; 4], fraction: f64, seed: u64) -> Result<DenseTensor> {
    if extents.contains(&0) {
        return invalid(format!("extents must be positive, got {extents:?}"));
    }
    if !(0.0..1.0).contains(&fraction) {
        return invalid(format!("missing fraction must lie in [0, 1), got {fraction}"));
    }
    let n: usize = extents.iter().product();
    let missing = (fraction * n as f64).round() as usize;
    if missing > n - extents[1] {
        return invalid(format!(
            "removing {missing} of {n} cells cannot leave a sample for each of {} poses",
            extents[1]
        ));
    }
    let cells: Vec<[usize; 4]> = grid_cells(extents).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut per_pose = vec![n / extents[1]; extents[1]];
    let mut mask = vec![1.0; n];
    let mut removed = 0;
    for k in order {
        if removed == missing {
            break;
        }
        let p = cells[k][1];
        if per_pose[p] > 1 {
            per_pose[p] -= 1;
            mask[k] = 0.0;
            removed += 1;
        }
    }
    DenseTensor::new(extents.to_vec(), mask)
}

/// Presence flags of a grid mask in cell order.
pub fn mask_presence(mask: &DenseTensor) -> Result<Vec<bool>> {
    if mask.order() != 4 {
        return invalid(format!("a grid mask is 4-way, got order {}", mask.order()));
    }
    mask.as_slice()
        .iter()
        .map(|&v| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => invalid(format!("mask entries must be 0 or 1, got {v}")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(m: &DenseTensor) -> usize {
        m.as_slice().iter().filter(|&&v| v == 0.0).count()
    }

    #[test]
    fn examples() {
        let m = make_missing_mask([2, 3, 2, 2], 0.0, 1).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 1.0));
        assert_eq!(zeros(&make_missing_mask([2, 2, 1, 1], 0.5, 7).unwrap()), 2);
        assert!(make_missing_mask([2, 2, 1, 1], 0.75, 0).is_err());
        assert!(make_missing_mask([2, 2, 1, 1], 1.0, 0).is_err());
        assert!(make_missing_mask([2, 2, 1, 1], -0.1, 0).is_err());
    }

    #[test]
    fn counts_and_pose_coverage() {
        let ext = [6, 7, 2, 3];
        for f in [0.1, 0.3, 0.5, 0.7, 0.9, 0.95] {
            for seed in 0..5 {
                let m = make_missing_mask(ext, f, seed).unwrap();
                assert_eq!(zeros(&m), (f * 252.0_f64).round() as usize);
                let present = mask_presence(&m).unwrap();
                for p in 0..7 {
                    assert!(grid_cells(ext).zip(&present).any(|(c, &v)| v && c[1] == p));
                }
            }
        }
    }

    #[test]
    fn deterministic_and_variable() {
        let ext = [4, 3, 2, 2];
        let mut differ = 0;
        for s in 0..100 {
            let a = make_missing_mask(ext, 0.4, s).unwrap();
            assert_eq!(a, make_missing_mask(ext, 0.4, s).unwrap());
            if a != make_missing_mask(ext, 0.4, s + 1).unwrap() {
                differ += 1;
            }
        }
        assert!(differ >= 95, "{differ}");
    }

    proptest::proptest! {
        #[test]
        fn count_and_pose_coverage(i in 1usize..6, p in 1usize..5, l in 1usize..3, e in 1usize..3, f in 0.0f64..0.99, seed: u64) {
            let ext = [i, p, l, e];
            let n = i * p * l * e;
            let missing = (f * n as f64).round() as usize;
            match make_missing_mask(ext, f, seed) {
                Ok(m) => {
                    proptest::prop_assert_eq!(zeros(&m), missing);
                    let present = mask_presence(&m).unwrap();
                    for pose in 0..p {
                        let covered = present.iter().enumerate().any(|(k, &v)| v && (k / (l * e)) % p == pose);
                        proptest::prop_assert!(covered);
                    }
                }
                Err(_) => proptest::prop_assert!(missing > n - p),
            }
        }
    }
}
