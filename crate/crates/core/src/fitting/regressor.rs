use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::solve_spd;
use crate::tensor::{io as tio, DenseTensor};

/// Linear update `δp = A f + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakRegressor {
    /// `N_p x N_f`.
    pub a: DMatrix<f64>,
    /// `N_p`.
    pub b: DVector<f64>,
}

impl WeakRegressor {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return invalid(format!("A has {} rows but b has {} entries", a.nrows(), b.len()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return invalid("regressor entries must be finite");
        }
        Ok(Self { a, b })
    }

    pub fn zeros(num_params: usize, num_features: usize) -> Self {
        Self {
            a: DMatrix::zeros(num_params, num_features),
            b: DVector::zeros(num_params),
        }
    }

    pub fn num_params(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.a.ncols()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.a.ncols() {
            return invalid(format!("{} features for a regressor expecting {}", f.len(), self.a.ncols()));
        }
        let d = &self.a * DVector::from_column_slice(f) + &self.b;
        Ok(d.as_slice().to_vec())
    }

    /// The regressor with `A` and `b` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            a: &self.a * c,
            b: &self.b * c,
        }
    }
}

/// Default ridge weight `1e-3 trace(F_c^T F_c) / N_f` for the centered
/// feature matrix `F_c`.
pub fn default_lambda(features: &DMatrix<f64>) -> f64 {
    let (fc, _) = center_columns(features);
    1e-3 * fc.norm_squared() / features.ncols().max(1) as f64
}

/// Closed-form ridge regression
/// `min sum_n |A f_n + b - δp_n|^2 + λ |A|_F^2`
/// for features `N x N_f` and targets `N x N_p`.
///
/// Features and targets are centered so `b` absorbs the means. The primal
/// system `(F_c^T F_c + λI)` is solved when `N_f <= N` or `λ = 0`, the dual
/// `(F_c F_c^T + λI)` otherwise.
pub fn train_weak(features: &DMatrix<f64>, deltas: &DMatrix<f64>, lambda: f64) -> Result<WeakRegressor> {
    let n = features.nrows();
    if n == 0 {
        return invalid("ridge regression needs at least one sample");
    }
    if deltas.nrows() != n {
        return invalid(format!("{n} feature rows but {} target rows", deltas.nrows()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("ridge weight must be finite and non-negative, got {lambda}"));
    }
    let (fc, mu_f) = center_columns(features);
    let (dc, mu_d) = center_columns(deltas);
    let nf = features.ncols();
    let at = if nf <= n || lambda == 0.0 {
        let mut g = fc.transpose() * &fc;
        for k in 0..nf {
            g[(k, k)] += lambda;
        }
        let rhs = fc.transpose() * &dc;
        solve(&g, &rhs, lambda, &dc)?
    } else {
        let mut g = &fc * fc.transpose();
        for k in 0..n {
            g[(k, k)] += lambda;
        }
        fc.transpose() * solve(&g, &dc, lambda, &dc)?
    };
    let a = at.transpose();
    let b = mu_d - &a * mu_f;
    WeakRegressor::new(a, b).map_err(|e| Error::Numerical(e.to_string()))
}

fn solve(g: &DMatrix<f64>, rhs: &DMatrix<f64>, lambda: f64, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if targets.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(g.ncols(), rhs.ncols()));
    }
    solve_spd(g, rhs).ok_or_else(|| {
        Error::Numerical(if lambda == 0.0 {
            "singular normal equations; use a positive ridge weight".to_string()
        } else {
            format!("normal equations not positive definite at ridge weight {lambda}")
        })
    })
}

fn center_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows().max(1) as f64;
    let mu = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n));
    let mut c = m.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu[j]);
    }
    (c, mu)
}

/// `u32 M` then per stage `A_m` and `b_m` as `UTT1` arrays.
pub fn stages_to_bytes(stages: &[WeakRegressor]) -> Vec<u8> {
    let mut out = (stages.len() as u32).to_le_bytes().to_vec();
    for s in stages {
        out.extend(tio::to_bytes(&DenseTensor::from_matrix(&s.a)));
        out.extend(tio::to_bytes(&DenseTensor::from_vector(s.b.as_slice())));
    }
    out
}

pub fn stages_from_bytes(bytes: &[u8]) -> Result<Vec<WeakRegressor>> {
    let mut r = bytes;
    let m = tio::read_u32(&mut r)? as usize;
    let mut stages = Vec::with_capacity(m.min(1024));
    for k in 0..m {
        let a = tio::read_tensor(&mut r)?.to_matrix().map_err(|e| Error::Data(e.to_string()))?;
        let b = tio::read_tensor(&mut r)?;
        let s = WeakRegressor::new(a, DVector::from_vec(b.into_vec()))
            .map_err(|e| Error::Data(format!("cascade stage {k}: {e}")))?;
        stages.push(s);
    }
    if !r.is_empty() {
        return Err(Error::Data("trailing bytes after cascade stages".into()));
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_targets_give_zero_regressor() {
        let f = random(10, 4, 1);
        let w = train_weak(&f, &DMatrix::zeros(10, 3), 0.0).unwrap();
        assert!(w.a.iter().all(|&v| v == 0.0) && w.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exactly_determined_recovery() {
        let (nf, np) = (6, 3);
        let f = random(nf + 1, nf, 2);
        let a_true = random(np, nf, 3);
        let b_true = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let d = DMatrix::from_fn(nf + 1, np, |r, c| (a_true.row(c) * f.row(r).transpose())[0] + b_true[c]);
        let w = train_weak(&f, &d, 0.0).unwrap();
        for r in 0..nf + 1 {
            let pred = w.apply(f.row(r).iter().copied().collect::<Vec<_>>().as_slice()).unwrap();
            for c in 0..np {
                assert!((pred[c] - d[(r, c)]).abs() < 1e-8);
            }
        }
        assert!((&w.a - &a_true).abs().max() < 1e-8);
    }

    #[test]
    fn singular_without_ridge_is_numerical_error() {
        let f = random(3, 8, 4);
        let d = random(3, 2, 5);
        assert!(matches!(train_weak(&f, &d, 0.0), Err(Error::Numerical(_))));
        assert!(train_weak(&f, &d, 1e-3).is_ok());
    }

    #[test]
    fn normal_equations_hold() {
        for (n, nf, lambda) in [(40, 10, 0.3), (8, 20, 0.05), (45, 30, 0.0)] {
            let f = random(n, nf, n as u64);
            let d = random(n, 4, nf as u64);
            let w = train_weak(&f, &d, lambda).unwrap();
            // gradient of the objective with respect to A and b
            let resid = &f * w.a.transpose() - &d + DMatrix::from_fn(n, 4, |_, c| w.b[c]);
            let grad_a = resid.transpose() * &f + &w.a * lambda;
            let grad_b = resid.row_sum();
            let scale = (d.transpose() * &f).abs().max().max(1.0);
            assert!(grad_a.abs().max() < 1e-6 * scale);
            assert!(grad_b.abs().max() < 1e-6 * scale);
        }
    }

    #[test]
    fn shrinkage_is_monotone() {
        let f = random(25, 8, 6);
        let d = random(25, 3, 7);
        let mut lambda = 1.0;
        let mut prev = f64::INFINITY;
        for _ in 0..6 {
            let norm = train_weak(&f, &d, lambda).unwrap().a.norm();
            assert!(norm < prev);
            prev = norm;
            lambda *= 2.0;
        }
    }

    #[test]
    fn stage_bytes_round_trip() {
        let stages = vec![
            WeakRegressor::new(random(3, 5, 8), DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap(),
            WeakRegressor::zeros(3, 5),
        ];
        let bytes = stages_to_bytes(&stages);
        assert_eq!(stages_from_bytes(&bytes).unwrap(), stages);
        assert!(stages_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
