use super::{core_from, left_unfold, right_unfold, slice, TtTensor};
use crate::error::{Result, TensorError};
use crate::linalg::{truncated_svd, TruncationSpec};
use crate::ops::{contract, tensor_trace};
use crate::tensor::{DenseTensor, Matrix};

/// Tensor chain (MPS with periodic boundary): entries are traces of slice
/// products, `R_0 = R_N >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TcTensor {
    cores: Vec<DenseTensor>,
}

impl TcTensor {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TensorError::InvalidArgument(
                "a tensor chain needs at least one core".into(),
            ));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(TensorError::InvalidShape(format!(
                    "core {k} has order {}, expected 3",
                    c.order()
                )));
            }
        }
        let n = cores.len();
        for k in 1..=n {
            if cores[k - 1].dims()[2] != cores[k % n].dims()[0] {
                return Err(TensorError::RankChain(k % n));
            }
        }
        Ok(TcTensor { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    /// `R_0, ..., R_N` with `R_N = R_0`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.dims()[0]).collect();
        r.push(r[0]);
        r
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.numel()).sum()
    }

    pub fn eval(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order() {
            return Err(TensorError::IndexArity {
                expected: self.order(),
                got: idx.len(),
            });
        }
        let r0 = self.cores[0].dims()[0];
        let mut acc = Matrix::identity(r0, r0);
        for (mode, (&i, c)) in idx.iter().zip(&self.cores).enumerate() {
            if i >= c.dims()[1] {
                return Err(TensorError::IndexOutOfRange {
                    mode,
                    index: i,
                    size: c.dims()[1],
                });
            }
            acc *= slice(c, i);
        }
        Ok(acc.trace())
    }

    pub fn full(&self) -> Result<DenseTensor> {
        let r0 = self.cores[0].dims()[0];
        let mut acc = left_unfold(&self.cores[0]);
        for c in &self.cores[1..] {
            let prod = &acc * right_unfold(c);
            acc =
                Matrix::from_column_slice(acc.nrows() * c.dims()[1], c.dims()[2], prod.as_slice());
        }
        let numel = acc.nrows() / r0;
        let data = (0..numel)
            .map(|e| (0..r0).map(|a| acc[(a + r0 * e, a)]).sum())
            .collect();
        DenseTensor::new(self.dims(), data)
    }
}

/// Opens the loop: the closing bond rides along as an extra index while
/// adjacent cores are merged and split by truncated SVD, and is traced out
/// at the last core. `eps` is an absolute bound on the dense error.
pub fn tc_to_tt(c: &TcTensor, eps: f64) -> Result<TtTensor> {
    if !(eps >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "tolerance must be nonnegative, got {eps}"
        )));
    }
    let n = c.order();
    let r0 = c.cores[0].dims()[0];
    let first = &c.cores[0];
    if n == 1 {
        let traced = tensor_trace(first, &[(0, 2)])?;
        return TtTensor::new(vec![traced.into_reshape(&[1, first.dims()[1], 1])?]);
    }
    let steps = (n - 1) as f64;
    let delta = eps / ((r0 as f64).sqrt() * steps.sqrt());
    // w: (R_left, I_k, R_0, R_k)
    let d = first.dims();
    let mut w = first
        .permute(&[1, 0, 2])?
        .into_reshape(&[1, d[1], d[0], d[2]])?;
    let mut cores = Vec::with_capacity(n);
    for next in &c.cores[1..] {
        let (rl, ik) = (w.dims()[0], w.dims()[1]);
        let (inext, rnext) = (next.dims()[1], next.dims()[2]);
        let merged = contract(&w, next, &[3], &[0])?;
        // merged: (R_left, I_k, R_0, I_{k+1}, R_{k+1})
        let rows = rl * ik;
        let m = Matrix::from_column_slice(rows, merged.numel() / rows, merged.data());
        let svd = truncated_svd(&m, TruncationSpec::eps(delta))?;
        let r = svd.rank();
        cores.push(core_from(&svd.u, rl, ik, r));
        w = DenseTensor::new(vec![r, r0, inext, rnext], svd.svt().as_slice().to_vec())?
            .permute(&[0, 2, 1, 3])?;
    }
    let (rl, il) = (w.dims()[0], w.dims()[1]);
    let last = tensor_trace(&w, &[(2, 3)])?;
    cores.push(last.into_reshape(&[rl, il, 1])?);
    TtTensor::new(cores)
}
