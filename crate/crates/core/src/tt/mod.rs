//! Tensor trains (MPS), their operator form (MPO) and tensor chains.
//!
//! Cores are order-3 tensors `R_{n-1} x I_n x R_n` stored little-endian, so the
//! left unfolding `(R_{n-1} I_n) x R_n` and the right unfolding
//! `R_{n-1} x (I_n R_n)` are plain reshapes of the core data.

mod algebra;
mod ascu;
mod decompose;
mod mpo;
mod ortho;
mod tc;

pub use algebra::{
    cp_to_tt, tt_add, tt_convolve, tt_hadamard, tt_inner, tt_kron, tt_mode_matrix,
    tt_modewise_transform, tt_outer, tt_scale, tt_sub,
};
pub use ascu::{ascu, ascu_tt, AscuOptions, AscuResult, AscuVariant};
pub use decompose::{tt_lrmf, tt_svd, tt_via_tucker2};
pub use mpo::{mpo_matmat, mpo_matvec, mpo_quadratic, TtMatrix};
pub use ortho::{tt_norm, tt_orthogonalize, tt_round};
pub use tc::{tc_to_tt, TcTensor};

use crate::error::{Result, TensorError};
use crate::tensor::{DenseTensor, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TtTensor {
    cores: Vec<DenseTensor>,
    ortho_center: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtStats {
    /// `R_0, ..., R_N`.
    pub ranks: Vec<usize>,
    pub param_count: usize,
    pub compression_ratio: f64,
}

impl TtTensor {
    /// Validates core orders, unit boundary ranks and the rank chain.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TensorError::InvalidArgument(
                "a tensor train needs at least one core".into(),
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
        if cores[0].dims()[0] != 1 || cores[cores.len() - 1].dims()[2] != 1 {
            return Err(TensorError::InvalidShape("boundary ranks must be 1".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].dims()[2] != cores[k].dims()[0] {
                return Err(TensorError::RankChain(k));
            }
        }
        Ok(TtTensor {
            cores,
            ortho_center: None,
        })
    }

    pub(crate) fn from_parts(cores: Vec<DenseTensor>, ortho_center: Option<usize>) -> Self {
        debug_assert!(TtTensor::new(cores.clone()).is_ok());
        TtTensor {
            cores,
            ortho_center,
        }
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    /// `R_0, ..., R_N`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.dims()[0]).collect();
        r.push(1);
        r
    }

    /// Internal bond sizes `R_1, ..., R_{N-1}`.
    pub fn inner_ranks(&self) -> Vec<usize> {
        self.cores[1..].iter().map(|c| c.dims()[0]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.numel()).sum()
    }

    pub fn stats(&self) -> TtStats {
        let params = self.param_count();
        let full: f64 = self.dims().iter().map(|&d| d as f64).product();
        TtStats {
            ranks: self.ranks(),
            param_count: params,
            compression_ratio: full / params as f64,
        }
    }

    pub fn eval(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order() {
            return Err(TensorError::IndexArity {
                expected: self.order(),
                got: idx.len(),
            });
        }
        let mut row = Matrix::from_element(1, 1, 1.0);
        for (mode, (&i, c)) in idx.iter().zip(&self.cores).enumerate() {
            if i >= c.dims()[1] {
                return Err(TensorError::IndexOutOfRange {
                    mode,
                    index: i,
                    size: c.dims()[1],
                });
            }
            row *= slice(c, i);
        }
        Ok(row[(0, 0)])
    }

    /// Dense tensor by progressive left-to-right contraction.
    pub fn full(&self) -> Result<DenseTensor> {
        let mut acc = left_unfold(&self.cores[0]);
        for c in &self.cores[1..] {
            let prod = &acc * right_unfold(c);
            let rows = acc.nrows() * c.dims()[1];
            acc = Matrix::from_column_slice(rows, c.dims()[2], prod.as_slice());
        }
        DenseTensor::new(self.dims(), acc.as_slice().to_vec())
    }

    pub fn norm_sq(&self) -> Result<f64> {
        tt_inner(self, self)
    }

    /// Train with the mode order reversed; the dense tensor is permuted by
    /// `(N-1, ..., 0)`.
    pub fn reverse(&self) -> TtTensor {
        let cores = self
            .cores
            .iter()
            .rev()
            .map(|c| c.permute(&[2, 1, 0]).expect("order-3 core"))
            .collect();
        let center = self.ortho_center.map(|n| self.order() - 1 - n);
        TtTensor {
            cores,
            ortho_center: center,
        }
    }
}

/// Lateral slice `G(:, i, :)` as an `R x R'` matrix.
pub(crate) fn slice(core: &DenseTensor, i: usize) -> Matrix {
    let d = core.dims();
    let data = core.data();
    Matrix::from_fn(d[0], d[2], |a, b| data[a + d[0] * (i + d[1] * b)])
}

pub(crate) fn left_unfold(core: &DenseTensor) -> Matrix {
    let d = core.dims();
    Matrix::from_column_slice(d[0] * d[1], d[2], core.data())
}

pub(crate) fn right_unfold(core: &DenseTensor) -> Matrix {
    let d = core.dims();
    Matrix::from_column_slice(d[0], d[1] * d[2], core.data())
}

/// Core of shape `(r0, i, r1)` from matrix data laid out column-major.
pub(crate) fn core_from(m: &Matrix, r0: usize, i: usize, r1: usize) -> DenseTensor {
    DenseTensor::new(vec![r0, i, r1], m.as_slice().to_vec()).expect("core size matches matrix")
}

pub(crate) fn core_from_slices(r0: usize, r1: usize, slices: &[Matrix]) -> DenseTensor {
    let i = slices.len();
    let mut data = vec![0.0; r0 * i * r1];
    for (k, s) in slices.iter().enumerate() {
        for b in 0..r1 {
            for a in 0..r0 {
                data[a + r0 * (k + i * b)] = s[(a, b)];
            }
        }
    }
    DenseTensor::new(vec![r0, i, r1], data).expect("nonzero core dims")
}

pub(crate) fn check_same_dims(x: &TtTensor, y: &TtTensor) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(TensorError::DimensionMismatch(format!(
            "TT dims {:?} vs {:?}",
            x.dims(),
            y.dims()
        )));
    }
    Ok(())
}
