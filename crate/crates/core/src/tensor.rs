//! Dense N-way arrays stored in little-endian (first index fastest) order.
//!
//! All indices are zero-based. The entry at multi-index `(i_0, .., i_{N-1})`
//! lives at linear position `i_0 + i_1 I_0 + i_2 I_0 I_1 + ..`.

use crate::error::{Result, TensorError};
use nalgebra::DMatrix;

pub type Matrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(TensorError::InvalidShape(format!("mode {pos} has size 0")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| TensorError::InvalidShape("element count overflows usize".into()))?;
        Ok(Shape { dims })
    }

    pub fn scalar() -> Self {
        Shape { dims: Vec::new() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Stride of each mode in the linear layout.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.dims.len());
        let mut acc = 1;
        for &d in &self.dims {
            s.push(acc);
            acc *= d;
        }
        s
    }
}

pub fn linear_index(shape: &Shape, idx: &[usize]) -> Result<usize> {
    if idx.len() != shape.order() {
        return Err(TensorError::IndexArity {
            expected: shape.order(),
            got: idx.len(),
        });
    }
    let mut lin = 0;
    let mut stride = 1;
    for (mode, (&i, &d)) in idx.iter().zip(shape.dims()).enumerate() {
        if i >= d {
            return Err(TensorError::IndexOutOfRange {
                mode,
                index: i,
                size: d,
            });
        }
        lin += i * stride;
        stride *= d;
    }
    Ok(lin)
}

/// Inverse of [`linear_index`]; `lin` must be below `shape.numel()`.
pub fn multi_index(shape: &Shape, mut lin: usize) -> Vec<usize> {
    shape
        .dims()
        .iter()
        .map(|&d| {
            let i = lin % d;
            lin /= d;
            i
        })
        .collect()
}

/// Advances a little-endian multi-index in place; returns false after the last one.
pub fn next_index(idx: &mut [usize], dims: &[usize]) -> bool {
    for (i, &d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < d {
            return true;
        }
        *i = 0;
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if data.len() != shape.numel() {
            return Err(TensorError::ElementCount {
                expected: shape.numel(),
                got: data.len(),
            });
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn from_shape(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(TensorError::ElementCount {
                expected: shape.numel(),
                got: data.len(),
            });
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims.to_vec())?;
        let n = shape.numel();
        Ok(DenseTensor {
            shape,
            data: vec![0.0; n],
        })
    }

    pub fn scalar(value: f64) -> Self {
        DenseTensor {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let shape = Shape::new(dims.to_vec())?;
        let mut data = Vec::with_capacity(shape.numel());
        let mut idx = vec![0; dims.len()];
        loop {
            data.push(f(&idx));
            if !next_index(&mut idx, dims) {
                break;
            }
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        DenseTensor {
            shape: Shape {
                dims: vec![m.nrows(), m.ncols()],
            },
            data: m.as_slice().to_vec(),
        }
    }

    pub fn from_vector(v: &[f64]) -> Result<Self> {
        DenseTensor::new(vec![v.len()], v.to_vec())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[linear_index(&self.shape, idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let k = linear_index(&self.shape, idx)?;
        self.data[k] = value;
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, alpha: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub(crate) fn zip_with(
        &self,
        other: &DenseTensor,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseTensor> {
        if self.dims() != other.dims() {
            return Err(TensorError::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.dims(),
                other.dims()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Frobenius distance to a tensor of identical shape.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn reshape(&self, new_dims: &[usize]) -> Result<DenseTensor> {
        let shape = Shape::new(new_dims.to_vec())?;
        if shape.numel() != self.numel() {
            return Err(TensorError::ElementCount {
                expected: self.numel(),
                got: shape.numel(),
            });
        }
        Ok(DenseTensor {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn into_reshape(self, new_dims: &[usize]) -> Result<DenseTensor> {
        let shape = Shape::new(new_dims.to_vec())?;
        if shape.numel() != self.data.len() {
            return Err(TensorError::ElementCount {
                expected: self.data.len(),
                got: shape.numel(),
            });
        }
        Ok(DenseTensor {
            shape,
            data: self.data,
        })
    }

    pub fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.order() {
            return Err(TensorError::InvalidMode {
                mode: n,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-n unfolding `X_(n)`: rows indexed by `i_n`, columns by the remaining
    /// indices merged little-endian in ascending mode order.
    pub fn matricize_mode(&self, n: usize) -> Result<Matrix> {
        self.check_mode(n)?;
        let dims = self.dims();
        let left: usize = dims[..n].iter().product();
        let size_n = dims[n];
        let right: usize = dims[n + 1..].iter().product();
        let mut m = Matrix::zeros(size_n, left * right);
        for r in 0..right {
            for i in 0..size_n {
                let base = (r * size_n + i) * left;
                for l in 0..left {
                    m[(i, l + left * r)] = self.data[base + l];
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::matricize_mode`].
    pub fn fold_mode(m: &Matrix, n: usize, dims: &[usize]) -> Result<DenseTensor> {
        if n >= dims.len() {
            return Err(TensorError::InvalidMode {
                mode: n,
                order: dims.len(),
            });
        }
        let shape = Shape::new(dims.to_vec())?;
        let left: usize = dims[..n].iter().product();
        let size_n = dims[n];
        let right: usize = dims[n + 1..].iter().product();
        if m.nrows() != size_n || m.ncols() != left * right {
            return Err(TensorError::DimensionMismatch(format!(
                "cannot fold {}x{} matrix into {:?} along mode {n}",
                m.nrows(),
                m.ncols(),
                dims
            )));
        }
        let mut data = vec![0.0; shape.numel()];
        for r in 0..right {
            for i in 0..size_n {
                let base = (r * size_n + i) * left;
                for l in 0..left {
                    data[base + l] = m[(i, l + left * r)];
                }
            }
        }
        Ok(DenseTensor { shape, data })
    }

    /// Canonical unfolding `X_<n>` of size `(I_0..I_{n-1}) x (I_n..)`; `n` counts
    /// the modes merged into the row index (`1..=N`).
    pub fn matricize_canonical(&self, n: usize) -> Result<Matrix> {
        if n == 0 || n > self.order() {
            return Err(TensorError::InvalidMode {
                mode: n,
                order: self.order(),
            });
        }
        let rows: usize = self.dims()[..n].iter().product();
        let cols = self.numel() / rows;
        Ok(Matrix::from_column_slice(rows, cols, &self.data))
    }

    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Reorders modes so that result mode `k` is input mode `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseTensor> {
        let n = self.order();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(TensorError::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let strides = self.shape.strides();
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims()[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
        let mut data = Vec::with_capacity(self.numel());
        let mut idx = vec![0; n];
        let mut offset = 0usize;
        loop {
            data.push(self.data[offset]);
            // advance idx and offset together
            let mut k = 0;
            loop {
                if k == n {
                    let shape = Shape { dims: new_dims };
                    return Ok(DenseTensor { shape, data });
                }
                idx[k] += 1;
                offset += src_strides[k];
                if idx[k] < new_dims[k] {
                    break;
                }
                offset -= src_strides[k] * new_dims[k];
                idx[k] = 0;
                k += 1;
            }
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order() != 2 {
            return Err(TensorError::InvalidShape(format!(
                "expected order 2, got {}",
                self.order()
            )));
        }
        Ok(Matrix::from_column_slice(
            self.dims()[0],
            self.dims()[1],
            &self.data,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
