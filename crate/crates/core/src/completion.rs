//! Tensor completion for datasets with missing training samples.
//!
//! The observed data `X` comes with a binary mask `O` (1 = observed). Both
//! solvers minimize the masked residual `||O * (X - X')||` of a low-rank
//! model `X'`: one with a Tucker power iteration, the other with a weighted
//! CP model fitted by gradient descent. Missing samples are first filled by
//! a variation-aware rule that averages available samples sharing the
//! missing sample's pose/illumination/expression states.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::leading_left_singular_vectors;
use crate::tensor::{hooi_sweep, hosvd, increment, tucker_reconstruct, DenseTensor};

/// An incomplete tensor: data plus a `{0,1}` mask of identical extents.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedTensor {
    data: DenseTensor,
    mask: DenseTensor,
}

impl MaskedTensor {
    pub fn new(data: DenseTensor, mask: DenseTensor) -> Result<Self> {
        if data.dims() != mask.dims() {
            return invalid(format!(
                "mask dims {:?} differ from data dims {:?}",
                mask.dims(),
                data.dims()
            ));
        }
        if let Some(v) = mask.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return invalid(format!("mask entries must be 0 or 1, found {v}"));
        }
        Ok(Self { data, mask })
    }

    /// Builds a sample mask from per-cell presence flags over all modes but
    /// the last; each flag is broadcast along the feature mode.
    pub fn from_cells(data: DenseTensor, present: &[bool]) -> Result<Self> {
        let feat = *data.dims().last().unwrap();
        if present.len() * feat != data.len() {
            return invalid(format!(
                "{} cell flags do not match tensor dims {:?}",
                present.len(),
                data.dims()
            ));
        }
        let mask: Vec<f64> = present
            .iter()
            .flat_map(|&p| std::iter::repeat_n(if p { 1.0 } else { 0.0 }, feat))
            .collect();
        let mask = DenseTensor::new(data.dims().to_vec(), mask)?;
        Self::new(data, mask)
    }

    pub fn data(&self) -> &DenseTensor {
        &self.data
    }

    pub fn mask(&self) -> &DenseTensor {
        &self.mask
    }

    pub fn dims(&self) -> &[usize] {
        self.data.dims()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m == 0.0).count()
    }

    /// Whether the mask is constant along the last (feature) mode.
    pub fn is_sample_constant(&self) -> bool {
        let feat = *self.dims().last().unwrap();
        self.mask
            .as_slice()
            .chunks_exact(feat)
            .all(|c| c.iter().all(|&v| v == c[0]))
    }

    /// Per-cell presence flags (sample-missing mode).
    pub fn cell_presence(&self) -> Result<Vec<bool>> {
        if !self.is_sample_constant() {
            return invalid("mask is not constant along the feature mode");
        }
        let feat = *self.dims().last().unwrap();
        Ok(self
            .mask
            .as_slice()
            .chunks_exact(feat)
            .map(|c| c[0] == 1.0)
            .collect())
    }

    /// Observed entries from `self`, everything else from `fill`.
    pub fn restore_observed(&self, fill: &DenseTensor) -> Result<DenseTensor> {
        if fill.dims() != self.dims() {
            return invalid("fill tensor dims differ from data dims");
        }
        let values = self
            .mask
            .as_slice()
            .iter()
            .zip(self.data.as_slice().iter().zip(fill.as_slice()))
            .map(|(&m, (&x, &f))| if m == 1.0 { x } else { f })
            .collect();
        DenseTensor::new(self.dims().to_vec(), values)
    }
}

/// `||O * (X - X')||`.
pub fn masked_residual_norm(x: &MaskedTensor, candidate: &DenseTensor) -> Result<f64> {
    if candidate.dims() != x.dims() {
        return invalid(format!(
            "candidate dims {:?} differ from data dims {:?}",
            candidate.dims(),
            x.dims()
        ));
    }
    let s: f64 = x
        .mask
        .as_slice()
        .iter()
        .zip(x.data.as_slice().iter().zip(candidate.as_slice()))
        .map(|(&m, (&a, &b))| m * (a - b) * (a - b))
        .sum();
    Ok(s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// AND rule, then OR rule, then uniform `[0,1]` values from `seed`.
    VariationAware { seed: u64 },
    /// Uniform `[0,1]` values from `seed` for every missing entry.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRule {
    And,
    Or,
    Random,
}

/// Which rule filled a missing sample at `cell = [i, p, l, e]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitRecord {
    pub cell: [usize; 4],
    pub rule: InitRule,
}

/// Fills every missing sample of a 5-way (identity, pose, illumination,
/// expression, feature) tensor; observed entries are copied verbatim.
///
/// Random values lie in `[0,1]` regardless of the data range, so callers
/// working with data far outside that range may want to normalize first.
pub fn initialize_missing(
    x: &MaskedTensor,
    policy: InitPolicy,
) -> Result<(DenseTensor, Vec<InitRecord>)> {
    if x.dims().len() != 5 {
        return invalid(format!(
            "initialization expects a 5-way sample tensor, got dims {:?}",
            x.dims()
        ));
    }
    let present = x.cell_presence()?;
    let dims = x.dims();
    let feat = dims[4];
    let cells = [dims[0], dims[1], dims[2], dims[3]];
    let cell_index = |c: &[usize]| ((c[0] * cells[1] + c[1]) * cells[2] + c[2]) * cells[3] + c[3];
    let mut out = x.data.clone();
    let mut records = Vec::new();
    let seed = match policy {
        InitPolicy::VariationAware { seed } | InitPolicy::Random { seed } => seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut cell = [0usize; 4];
    for _ in 0..present.len() {
        let k = cell_index(&cell);
        if !present[k] {
            let mut rule = InitRule::Random;
            let mut mean = vec![0.0; feat];
            if matches!(policy, InitPolicy::VariationAware { .. }) {
                for (candidate, matches) in [
                    (InitRule::And, and_rule as fn(&[usize; 4], &[usize; 4]) -> bool),
                    (InitRule::Or, or_rule),
                ] {
                    let mut count = 0usize;
                    mean.iter_mut().for_each(|m| *m = 0.0);
                    let mut other = [0usize; 4];
                    for _ in 0..present.len() {
                        let j = cell_index(&other);
                        if present[j] && matches(&cell, &other) {
                            let src = &x.data.as_slice()[j * feat..(j + 1) * feat];
                            for (m, s) in mean.iter_mut().zip(src) {
                                *m += s;
                            }
                            count += 1;
                        }
                        increment(&mut other, &cells);
                    }
                    if count > 0 {
                        mean.iter_mut().for_each(|m| *m /= count as f64);
                        rule = candidate;
                        break;
                    }
                }
            }
            let dst = &mut out.as_mut_slice()[k * feat..(k + 1) * feat];
            if rule == InitRule::Random {
                for d in dst.iter_mut() {
                    *d = rng.random_range(0.0..=1.0);
                }
            } else {
                dst.copy_from_slice(&mean);
            }
            records.push(InitRecord { cell, rule });
        }
        increment(&mut cell, &cells);
    }
    Ok((out, records))
}

fn and_rule(a: &[usize; 4], b: &[usize; 4]) -> bool {
    a[1] == b[1] && a[2] == b[2] && a[3] == b[3]
}

fn or_rule(a: &[usize; 4], b: &[usize; 4]) -> bool {
    a[1] == b[1] || a[2] == b[2] || a[3] == b[3]
}

/// Result of a completion solver.
#[derive(Debug, Clone)]
pub struct Completion {
    pub tensor: DenseTensor,
    /// Masked residual `||O * (X - X'_k)||` of the low-rank model after each
    /// iteration.
    pub trace: Vec<f64>,
}

/// Tucker power-iteration completion.
///
/// Each iteration imputes the missing entries from the current low-rank
/// estimate, refits a rank-`ranks` Tucker model, and restores the observed
/// entries. The first fit is a truncated HOSVD; later fits are HOOI sweeps
/// warm-started from the previous factors, which keeps the objective trace
/// non-increasing. Stops when the relative objective change drops below
/// `tol` or after `max_iter` iterations.
pub fn complete_tucker_power(
    x: &MaskedTensor,
    init: &DenseTensor,
    ranks: &[usize],
    max_iter: usize,
    tol: f64,
) -> Result<Completion> {
    if init.dims() != x.dims() {
        return invalid("initial estimate dims differ from data dims");
    }
    if ranks.len() != x.dims().len() {
        return invalid(format!("{} ranks for order {}", ranks.len(), x.dims().len()));
    }
    if let Some((n, (&r, &d))) = ranks.iter().zip(x.dims()).enumerate().find(|(_, (r, d))| *r > *d || **r == 0) {
        return invalid(format!("rank {r} for mode {n} must lie in 1..={d}"));
    }
    if x.missing_count() == 0 {
        return Ok(Completion {
            tensor: x.data.clone(),
            trace: vec![0.0],
        });
    }
    let mut current = x.restore_observed(init)?;
    let mut model = hosvd(&current, ranks)?;
    let mut trace = Vec::new();
    for iter in 0..max_iter.max(1) {
        if iter > 0 {
            model = hooi_sweep(&current, &model.factors)?;
        }
        let approx = tucker_reconstruct(&model)?;
        let obj = masked_residual_norm(x, &approx)?;
        if !obj.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite completion objective at iteration {}",
                iter + 1
            )));
        }
        current = x.restore_observed(&approx)?;
        let prev = trace.last().copied();
        trace.push(obj);
        if obj == 0.0 {
            break;
        }
        if let Some(p) = prev {
            if (p - obj).abs() <= tol * p {
                break;
            }
        }
    }
    Ok(Completion {
        tensor: current,
        trace,
    })
}

/// Factor matrices of a CP (CANDECOMP/PARAFAC) model, one `I_n x R` matrix
/// per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    pub factors: Vec<DMatrix<f64>>,
}

impl CpFactors {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return invalid("CP model needs at least one factor");
        };
        let r = first.ncols();
        if r == 0 || factors.iter().any(|f| f.ncols() != r) {
            return invalid("CP factors must share a positive column count");
        }
        Ok(Self { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// `sum_r a_1r ∘ a_2r ∘ ... ∘ a_Nr`.
    pub fn reconstruct(&self) -> DenseTensor {
        let dims = self.dims();
        let r = self.rank();
        DenseTensor::from_fn(&dims, |idx| {
            (0..r)
                .map(|c| {
                    idx.iter()
                        .zip(&self.factors)
                        .map(|(&i, f)| f[(i, c)])
                        .product::<f64>()
                })
                .sum()
        })
        .expect("factor row counts are positive")
    }
}

/// Weighted CP objective `½||O * (X - CP(A))||²` and its gradient with
/// respect to every factor matrix.
pub fn cp_objective_and_gradient(
    x: &MaskedTensor,
    cp: &CpFactors,
) -> Result<(f64, Vec<DMatrix<f64>>)> {
    let dims = x.dims().to_vec();
    if cp.dims() != dims {
        return invalid(format!("CP dims {:?} differ from data dims {dims:?}", cp.dims()));
    }
    let n = dims.len();
    let r = cp.rank();
    let mut grads: Vec<DMatrix<f64>> = cp
        .factors
        .iter()
        .map(|f| DMatrix::zeros(f.nrows(), r))
        .collect();
    let mut obj = 0.0;
    let mut idx = vec![0usize; n];
    let mut prefix = vec![0.0; n + 1];
    let mut suffix = vec![0.0; n + 1];
    let data = x.data.as_slice();
    let mask = x.mask.as_slice();
    let mut comp = vec![0.0; r];
    for k in 0..data.len() {
        if mask[k] != 0.0 {
            for (c, v) in comp.iter_mut().enumerate() {
                *v = idx
                    .iter()
                    .zip(&cp.factors)
                    .map(|(&i, f)| f[(i, c)])
                    .product();
            }
            let resid = data[k] - comp.iter().sum::<f64>();
            obj += 0.5 * resid * resid;
            for c in 0..r {
                prefix[0] = 1.0;
                for m in 0..n {
                    prefix[m + 1] = prefix[m] * cp.factors[m][(idx[m], c)];
                }
                suffix[n] = 1.0;
                for m in (0..n).rev() {
                    suffix[m] = suffix[m + 1] * cp.factors[m][(idx[m], c)];
                }
                for m in 0..n {
                    grads[m][(idx[m], c)] -= resid * prefix[m] * suffix[m + 1];
                }
            }
        }
        increment(&mut idx, &dims);
    }
    Ok((obj, grads))
}

/// CP factors seeded from the truncated HOSVD factors of `init`.
///
/// Columns beyond a mode's extent reuse a singular vector plus a small
/// fixed pseudo-random perturbation so that components can separate. A
/// single scalar, split evenly over the modes, fits the overall scale to the
/// observed data.
pub fn cp_init_from_hosvd(x: &MaskedTensor, init: &DenseTensor, rank: usize) -> Result<CpFactors> {
    if rank == 0 {
        return invalid("CP rank must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut factors = Vec::with_capacity(init.order());
    for (n, &d) in init.dims().iter().enumerate() {
        let u = leading_left_singular_vectors(init, n, rank.min(d))?;
        let mut a = DMatrix::zeros(d, rank);
        for c in 0..rank {
            let mut col = u.column(c % u.ncols()).into_owned();
            if c >= u.ncols() {
                for v in col.iter_mut() {
                    *v += 0.1 * rng.random_range(-1.0..1.0);
                }
                let nc = col.norm();
                col /= nc;
            }
            a.set_column(c, &col);
        }
        factors.push(a);
    }
    let mut cp = CpFactors::new(factors)?;
    let model = cp.reconstruct();
    let (mut num, mut den) = (0.0, 0.0);
    for ((&m, &xv), &mv) in x.mask.as_slice().iter().zip(x.data.as_slice()).zip(model.as_slice()) {
        num += m * xv * mv;
        den += m * mv * mv;
    }
    let mut lambda = if den > 0.0 { num / den } else { 1.0 };
    if lambda < 0.0 {
        cp.factors[0].neg_mut();
        lambda = -lambda;
    }
    if lambda > 0.0 {
        let s = lambda.powf(1.0 / cp.factors.len() as f64);
        for f in &mut cp.factors {
            *f *= s;
        }
    }
    Ok(cp)
}

const ARMIJO: f64 = 1e-4;

/// Weighted CP completion fitted by gradient descent with a backtracking
/// (halving, Armijo) line search.
///
/// Trial steps use the Barzilai-Borwein length; only steps satisfying the
/// Armijo condition are accepted, so the objective never increases. With
/// `restore_observed` the observed entries of the output are the input
/// data; otherwise the raw CP reconstruction is returned.
pub fn complete_cp_weighted(
    x: &MaskedTensor,
    init: &DenseTensor,
    rank: usize,
    max_iter: usize,
    tol: f64,
    restore_observed: bool,
) -> Result<Completion> {
    if init.dims() != x.dims() {
        return invalid("initial estimate dims differ from data dims");
    }
    let mut cp = cp_init_from_hosvd(x, init, rank)?;
    let (mut obj, mut grad) = cp_objective_and_gradient(x, &cp)?;
    check_finite(obj, &grad, 0)?;
    let mut trace = vec![(2.0 * obj).sqrt()];
    let mut step = 1.0 / grad_norm_sq(&grad).sqrt().max(1.0);
    for iter in 1..=max_iter {
        let g2 = grad_norm_sq(&grad);
        if g2 == 0.0 || obj == 0.0 {
            break;
        }
        let mut alpha = step;
        let mut accepted = None;
        while alpha > 1e-300 {
            let trial = CpFactors {
                factors: cp
                    .factors
                    .iter()
                    .zip(&grad)
                    .map(|(f, g)| f - g * alpha)
                    .collect(),
            };
            let (t_obj, t_grad) = cp_objective_and_gradient(x, &trial)?;
            if t_obj.is_finite() && t_obj <= obj - ARMIJO * alpha * g2 {
                check_finite(t_obj, &t_grad, iter)?;
                accepted = Some((trial, t_obj, t_grad));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_obj, next_grad)) = accepted else {
            break;
        };
        // Barzilai-Borwein length for the next trial step
        let (mut ss, mut sy) = (0.0, 0.0);
        for ((a, b), (ga, gb)) in next.factors.iter().zip(&cp.factors).zip(next_grad.iter().zip(&grad)) {
            let s = a - b;
            let y = ga - gb;
            ss += s.norm_squared();
            sy += s.dot(&y);
        }
        step = if sy > 0.0 { ss / sy } else { alpha * 2.0 };
        let prev = obj;
        cp = next;
        obj = next_obj;
        grad = next_grad;
        trace.push((2.0 * obj).sqrt());
        if prev - obj <= tol * prev {
            break;
        }
    }
    let model = cp.reconstruct();
    let tensor = if restore_observed {
        x.restore_observed(&model)?
    } else {
        model
    };
    Ok(Completion { tensor, trace })
}

fn grad_norm_sq(g: &[DMatrix<f64>]) -> f64 {
    g.iter().map(|m| m.norm_squared()).sum()
}

fn check_finite(obj: f64, grad: &[DMatrix<f64>], iter: usize) -> Result<()> {
    if !obj.is_finite() || grad.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical(format!(
            "non-finite CP objective or gradient at iteration {iter}"
        )));
    }
    Ok(())
}

/// Root-mean-square error over the missing (`mask == 0`) entries only;
/// zero when nothing is missing.
pub fn reconstruction_rms(
    truth: &DenseTensor,
    completed: &DenseTensor,
    mask: &DenseTensor,
) -> Result<f64> {
    if truth.dims() != completed.dims() || truth.dims() != mask.dims() {
        return invalid("truth, completed and mask must share dims");
    }
    let (mut s, mut n) = (0.0, 0usize);
    for ((&t, &c), &m) in truth.as_slice().iter().zip(completed.as_slice()).zip(mask.as_slice()) {
        if m == 0.0 {
            s += (t - c) * (t - c);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { (s / n as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], v: &[f64]) -> DenseTensor {
        DenseTensor::new(dims.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn residual_examples() {
        let data = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let mask = t(&[2, 2], &[1.0, 1.0, 1.0, 0.0]);
        let x = MaskedTensor::new(data.clone(), mask).unwrap();
        assert_eq!(masked_residual_norm(&x, &data).unwrap(), 0.0);
        let r = masked_residual_norm(&x, &DenseTensor::zeros(&[2, 2]).unwrap()).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        let none = MaskedTensor::new(data.clone(), DenseTensor::zeros(&[2, 2]).unwrap()).unwrap();
        assert_eq!(masked_residual_norm(&none, &t(&[2, 2], &[9.0; 4])).unwrap(), 0.0);
        assert!(masked_residual_norm(&x, &DenseTensor::zeros(&[4]).unwrap()).is_err());
    }

    #[test]
    fn mask_validation() {
        let d = DenseTensor::zeros(&[2, 2]).unwrap();
        assert!(MaskedTensor::new(d.clone(), t(&[2, 2], &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(MaskedTensor::new(d, DenseTensor::zeros(&[4]).unwrap()).is_err());
    }

    #[test]
    fn and_rule_example() {
        // identities 0..3 at (p,l,e) = (0,0,0); identity 1 missing
        let data = t(&[3, 1, 1, 1, 2], &[1.0, 2.0, 99.0, 99.0, 3.0, 4.0]);
        let x = MaskedTensor::from_cells(data, &[true, false, true]).unwrap();
        let (out, rec) = initialize_missing(&x, InitPolicy::VariationAware { seed: 1 }).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0]);
        assert_eq!(rec, vec![InitRecord { cell: [1, 0, 0, 0], rule: InitRule::And }]);
    }

    #[test]
    fn or_rule_when_and_is_empty() {
        // 1 identity, 2 poses, 1 illum, 2 expr; missing (p=0,e=0)
        let data = t(&[1, 2, 1, 2, 1], &[0.0, 2.0, 4.0, 8.0]);
        let x = MaskedTensor::from_cells(data, &[false, true, true, true]).unwrap();
        let (out, rec) = initialize_missing(&x, InitPolicy::VariationAware { seed: 1 }).unwrap();
        // shares pose with (0,1)=2, expression with (1,0)=4, illumination with all three
        assert!((out.as_slice()[0] - (2.0 + 4.0 + 8.0) / 3.0).abs() < 1e-15);
        assert_eq!(rec[0].rule, InitRule::Or);
    }

    #[test]
    fn fully_observed_is_untouched() {
        let data = DenseTensor::from_fn(&[2, 2, 1, 1, 3], |i| i.iter().sum::<usize>() as f64).unwrap();
        let x = MaskedTensor::from_cells(data.clone(), &[true; 4]).unwrap();
        let (out, rec) = initialize_missing(&x, InitPolicy::VariationAware { seed: 0 }).unwrap();
        assert_eq!(out, data);
        assert!(rec.is_empty());
    }

    #[test]
    fn random_fallback_is_reproducible() {
        // cells (p,l,e) = (0,0,0) and (1,1,1) share nothing
        let data = DenseTensor::filled(&[1, 2, 2, 2, 4], 7.0).unwrap();
        let mut present = vec![false; 8];
        present[7] = true;
        let x = MaskedTensor::from_cells(data, &present).unwrap();
        // exhaustive check that cell 0 shares no index with the only observed cell
        assert!(!or_rule(&[0, 0, 0, 0], &[0, 1, 1, 1]));
        let (a, rec) = initialize_missing(&x, InitPolicy::VariationAware { seed: 42 }).unwrap();
        let (b, _) = initialize_missing(&x, InitPolicy::VariationAware { seed: 42 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(rec[0].rule, InitRule::Random);
        assert!(a.as_slice()[..4].iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn init_errors() {
        let x = MaskedTensor::new(DenseTensor::zeros(&[2, 2]).unwrap(), DenseTensor::filled(&[2, 2], 1.0).unwrap()).unwrap();
        assert!(initialize_missing(&x, InitPolicy::Random { seed: 0 }).is_err());
        let mut mask = DenseTensor::filled(&[1, 1, 1, 2, 2], 1.0).unwrap();
        mask.as_mut_slice()[0] = 0.0;
        let y = MaskedTensor::new(DenseTensor::zeros(&[1, 1, 1, 2, 2]).unwrap(), mask).unwrap();
        assert!(initialize_missing(&y, InitPolicy::Random { seed: 0 }).is_err());
    }

    #[test]
    fn tucker_all_observed_is_identity() {
        let data = DenseTensor::from_fn(&[3, 3, 2], |i| (i[0] * 7 + i[1] * 3 + i[2]) as f64).unwrap();
        let x = MaskedTensor::new(data.clone(), DenseTensor::filled(&[3, 3, 2], 1.0).unwrap()).unwrap();
        let c = complete_tucker_power(&x, &data, &[1, 1, 1], 10, 1e-6).unwrap();
        assert_eq!(c.tensor, data);
        assert_eq!(c.trace, vec![0.0]);
        assert!(complete_tucker_power(&x, &data, &[4, 1, 1], 10, 1e-6).is_err());
    }

    #[test]
    fn rms_examples() {
        let truth = t(&[1, 1, 1, 1, 2], &[3.0, 4.0]);
        let zero = DenseTensor::zeros(&[1, 1, 1, 1, 2]).unwrap();
        let r = reconstruction_rms(&truth, &zero, &zero).unwrap();
        assert!((r - 3.5355339).abs() < 1e-6);
        assert_eq!(reconstruction_rms(&truth, &truth, &zero).unwrap(), 0.0);
        let ones = DenseTensor::filled(&[1, 1, 1, 1, 2], 1.0).unwrap();
        assert_eq!(reconstruction_rms(&truth, &zero, &ones).unwrap(), 0.0);
    }

    #[test]
    fn cp_rank_must_be_positive() {
        let d = DenseTensor::zeros(&[2, 2]).unwrap();
        let x = MaskedTensor::new(d.clone(), DenseTensor::filled(&[2, 2], 1.0).unwrap()).unwrap();
        assert!(complete_cp_weighted(&x, &d, 0, 10, 1e-6, true).is_err());
    }
}
