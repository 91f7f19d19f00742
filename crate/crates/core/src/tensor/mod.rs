//! Dense N-way tensors.
//!
//! Storage is a flat `Vec<f64>` with the **last** index varying fastest
//! (row-major). Modes are numbered from zero.
//!
//! The mode-n unfolding `X_(n)` is an `I_n x prod_{k != n} I_k` matrix whose
//! columns enumerate the remaining indices with the *lowest* remaining mode
//! varying fastest. `fold` is its exact inverse. Every place that reads basis
//! vectors out of an unfolded tensor goes through these two functions.

mod hosvd;
pub mod io;

pub use hosvd::{hooi_sweep, hosvd, tucker_reconstruct, TuckerModel};

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return invalid(format!(
                "tensor of dims {dims:?} needs {len} values, got {}",
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        check_dims(dims)?;
        let len = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in layout order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_dims(dims)?;
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, dims);
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Wraps a matrix as a 2-way tensor (`rows x cols`).
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            dims: vec![r, c],
            data,
        }
    }

    /// Interprets a 2-way tensor as a matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.dims.len() != 2 {
            return invalid(format!("expected a 2-way tensor, got dims {:?}", self.dims));
        }
        Ok(DMatrix::from_row_slice(self.dims[0], self.dims[1], &self.data))
    }

    pub fn from_vector(v: &[f64]) -> Self {
        Self {
            dims: vec![v.len().max(1)],
            data: if v.is_empty() { vec![0.0] } else { v.to_vec() },
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// Frobenius norm: square root of the sum of squares of all entries.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return invalid(format!(
                "dimension mismatch: {:?} vs {:?}",
                self.dims, other.dims
            ));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Contracts `mode` with the vector `v`, removing that mode.
    ///
    /// Equivalent to a mode product with the `1 x I_mode` matrix `v^T`
    /// followed by dropping the singleton mode. Contracting the only mode
    /// of a 1-way tensor yields a 1-way tensor of extent 1.
    pub fn contract(&self, mode: usize, v: &[f64]) -> Result<Self> {
        check_mode(self, mode)?;
        if v.len() != self.dims[mode] {
            return invalid(format!(
                "contraction vector has length {}, mode {mode} has extent {}",
                v.len(),
                self.dims[mode]
            ));
        }
        let (left, n, right) = split(&self.dims, mode);
        let mut out = vec![0.0; left * right];
        for l in 0..left {
            let dst = &mut out[l * right..(l + 1) * right];
            for (i, &w) in v.iter().enumerate().take(n) {
                if w == 0.0 {
                    continue;
                }
                let src = &self.data[(l * n + i) * right..(l * n + i + 1) * right];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        let mut dims = self.dims.clone();
        if dims.len() > 1 {
            dims.remove(mode);
        } else {
            dims[0] = 1;
        }
        Ok(Self { dims, data: out })
    }

    /// `X_(n) X_(n)^T`, computed without materializing the unfolding.
    pub fn mode_gram(&self, mode: usize) -> Result<DMatrix<f64>> {
        check_mode(self, mode)?;
        let (left, n, right) = split(&self.dims, mode);
        if right == 1 {
            // the data is the column-major n x left unfolding
            let m = DMatrixView::from_slice(&self.data, n, left);
            return Ok(m * m.transpose());
        }
        let mut g = DMatrix::zeros(n, n);
        for l in 0..left {
            // row-major n x right block, read as column-major right x n
            let b = DMatrixView::from_slice(&self.data[l * n * right..(l + 1) * n * right], right, n);
            g.gemm_tr(1.0, &b, &b, 1.0);
        }
        Ok(g)
    }
}

/// Mode-`mode` unfolding. See the module docs for the column order.
pub fn unfold(x: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    check_mode(x, mode)?;
    let (left, n, right) = split(&x.dims, mode);
    let left_cm = row_to_col_major(&x.dims[..mode]);
    let right_cm = row_to_col_major(&x.dims[mode + 1..]);
    let mut m = DMatrix::zeros(n, left * right);
    for l in 0..left {
        for i in 0..n {
            let base = (l * n + i) * right;
            for r in 0..right {
                m[(i, left_cm[l] + left * right_cm[r])] = x.data[base + r];
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &DMatrix<f64>, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_dims(dims)?;
    if mode >= dims.len() {
        return invalid(format!("mode {mode} out of range for order {}", dims.len()));
    }
    let (left, n, right) = split(dims, mode);
    if m.nrows() != n || m.ncols() != left * right {
        return invalid(format!(
            "matrix {}x{} is not a mode-{mode} unfolding of {dims:?}",
            m.nrows(),
            m.ncols()
        ));
    }
    let left_cm = row_to_col_major(&dims[..mode]);
    let right_cm = row_to_col_major(&dims[mode + 1..]);
    let mut data = vec![0.0; left * n * right];
    for l in 0..left {
        for i in 0..n {
            let base = (l * n + i) * right;
            for r in 0..right {
                data[base + r] = m[(i, left_cm[l] + left * right_cm[r])];
            }
        }
    }
    Ok(DenseTensor {
        dims: dims.to_vec(),
        data,
    })
}

/// Mode-n product `x ×_mode y` with `y` of shape `J x I_mode`:
/// `z(.., j, ..) = sum_i x(.., i, ..) y(j, i)`.
pub fn mode_n_product(x: &DenseTensor, y: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    check_mode(x, mode)?;
    let (left, n, right) = split(&x.dims, mode);
    if y.ncols() != n {
        return invalid(format!(
            "matrix has {} columns but mode {mode} has extent {n}",
            y.ncols()
        ));
    }
    let j_ext = y.nrows();
    if j_ext == 0 {
        return invalid("mode product with an empty matrix");
    }
    let mut out = vec![0.0; left * j_ext * right];
    if right == 1 {
        // column-major (n x left) -> (J x left)
        let src = DMatrixView::from_slice(&x.data, n, left);
        DMatrixViewMut::from_slice(&mut out, j_ext, left).gemm(1.0, y, &src, 0.0);
    } else {
        let yt = y.transpose();
        for l in 0..left {
            // row-major blocks read as column-major (right x n) -> (right x J)
            let src = DMatrixView::from_slice(&x.data[l * n * right..(l + 1) * n * right], right, n);
            let mut dst = DMatrixViewMut::from_slice(&mut out[l * j_ext * right..(l + 1) * j_ext * right], right, j_ext);
            dst.gemm(1.0, &src, &yt, 0.0);
        }
    }
    let mut dims = x.dims.clone();
    dims[mode] = j_ext;
    Ok(DenseTensor { dims, data: out })
}

pub fn tensor_norm(x: &DenseTensor) -> f64 {
    x.norm()
}

/// `(prod of extents before mode, extent of mode, prod of extents after mode)`.
pub(crate) fn split(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

/// For a sub-block of extents, maps each row-major linear index to the
/// column-major (first index fastest) linear index of the same multi-index.
fn row_to_col_major(dims: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for k in 1..dims.len() {
        strides[k] = strides[k - 1] * dims[k - 1];
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        increment(&mut idx, dims);
    }
    out
}

/// Advances a multi-index in layout order (last index fastest).
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return invalid("tensor must have at least one mode");
    }
    if dims.contains(&0) {
        return invalid(format!("every extent must be positive, got {dims:?}"));
    }
    Ok(())
}

fn check_mode(x: &DenseTensor, mode: usize) -> Result<()> {
    if mode >= x.order() {
        return invalid(format!("mode {mode} out of range for order {}", x.order()));
    }
    Ok(())
}
