use super::{core_from_slices, slice, tt_inner, tt_round, tt_svd, TtTensor};
use crate::block::{c_product, BlockMatrix};
use crate::error::{Result, TensorError};
use crate::ops::kron_matrix;
use crate::tensor::{DenseTensor, Matrix};

/// Matrix in TT form (MPO). Core `n` is `R_{n-1} x I_n x J_n x R_n`; rows of
/// the represented matrix run over `(i_1, .., i_N)` and columns over
/// `(j_1, .., j_N)`, both little-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct TtMatrix {
    cores: Vec<DenseTensor>,
}

impl TtMatrix {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TensorError::InvalidArgument(
                "an MPO needs at least one core".into(),
            ));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 4 {
                return Err(TensorError::InvalidShape(format!(
                    "core {k} has order {}, expected 4",
                    c.order()
                )));
            }
        }
        if cores[0].dims()[0] != 1 || cores[cores.len() - 1].dims()[3] != 1 {
            return Err(TensorError::InvalidShape("boundary ranks must be 1".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].dims()[3] != cores[k].dims()[0] {
                return Err(TensorError::RankChain(k));
            }
        }
        Ok(TtMatrix { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn row_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    pub fn col_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[2]).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.dims()[0]).collect();
        r.push(1);
        r
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.numel()).sum()
    }

    /// Identity operator with all ranks 1.
    pub fn identity(dims: &[usize]) -> Result<Self> {
        let cores = dims
            .iter()
            .map(|&d| {
                DenseTensor::from_fn(
                    &[1, d, d, 1],
                    |idx| if idx[1] == idx[2] { 1.0 } else { 0.0 },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        TtMatrix::new(cores)
    }

    /// Train over merged modes `i_n + I_n j_n`.
    pub fn to_tt(&self) -> Result<TtTensor> {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let d = c.dims();
                c.reshape(&[d[0], d[1] * d[2], d[3]])
            })
            .collect::<Result<Vec<_>>>()?;
        TtTensor::new(cores)
    }

    /// Inverse of [`TtMatrix::to_tt`].
    pub fn from_tt(x: &TtTensor, row_dims: &[usize], col_dims: &[usize]) -> Result<Self> {
        if row_dims.len() != x.order() || col_dims.len() != x.order() {
            return Err(TensorError::DimensionMismatch(
                "one row and one column size per core".into(),
            ));
        }
        let cores = x
            .cores()
            .iter()
            .zip(row_dims.iter().zip(col_dims))
            .map(|(c, (&i, &j))| {
                let d = c.dims();
                c.reshape(&[d[0], i, j, d[2]])
            })
            .collect::<Result<Vec<_>>>()?;
        TtMatrix::new(cores)
    }

    /// TT-SVD of the interleaved `(i_1 j_1, i_2 j_2, ..)` tensorization of `m`.
    pub fn from_matrix(
        m: &Matrix,
        row_dims: &[usize],
        col_dims: &[usize],
        eps: f64,
    ) -> Result<Self> {
        let t = interleave(m, row_dims, col_dims)?;
        TtMatrix::from_tt(&tt_svd(&t, eps, None)?, row_dims, col_dims)
    }

    pub fn full_matrix(&self) -> Result<Matrix> {
        let n = self.order();
        let mut dims = Vec::with_capacity(2 * n);
        for c in &self.cores {
            dims.push(c.dims()[1]);
            dims.push(c.dims()[2]);
        }
        let t = self.to_tt()?.full()?.into_reshape(&dims)?;
        let perm: Vec<usize> = (0..n)
            .map(|k| 2 * k)
            .chain((0..n).map(|k| 2 * k + 1))
            .collect();
        let rows: usize = self.row_dims().iter().product();
        let cols: usize = self.col_dims().iter().product();
        Ok(Matrix::from_column_slice(
            rows,
            cols,
            t.permute(&perm)?.data(),
        ))
    }

    /// Core `n` as an `R_{n-1} x R_n` grid of `I_n x J_n` blocks.
    pub fn block_core(&self, n: usize) -> Result<BlockMatrix> {
        let c = &self.cores[n];
        let d = c.dims();
        let data = c.data();
        BlockMatrix::from_fn((d[0], d[3]), |p, q| {
            Matrix::from_fn(d[1], d[2], |i, j| {
                data[p + d[0] * (i + d[1] * (j + d[2] * q))]
            })
        })
    }

    /// Slice `A(:, i, j, :)`.
    fn slice(&self, n: usize, i: usize, j: usize) -> Matrix {
        let c = &self.cores[n];
        let d = c.dims();
        let data = c.data();
        Matrix::from_fn(d[0], d[3], |p, q| {
            data[p + d[0] * (i + d[1] * (j + d[2] * q))]
        })
    }
}

/// Reshapes `m` to `(I_1 J_1, .., I_N J_N)` with merged index `i_n + I_n j_n`.
pub(crate) fn interleave(
    m: &Matrix,
    row_dims: &[usize],
    col_dims: &[usize],
) -> Result<DenseTensor> {
    let n = row_dims.len();
    if col_dims.len() != n
        || row_dims.iter().product::<usize>() != m.nrows()
        || col_dims.iter().product::<usize>() != m.ncols()
    {
        return Err(TensorError::DimensionMismatch(format!(
            "{}x{} matrix does not factor as {:?} x {:?}",
            m.nrows(),
            m.ncols(),
            row_dims,
            col_dims
        )));
    }
    let dims: Vec<usize> = row_dims.iter().chain(col_dims).copied().collect();
    let t = DenseTensor::new(dims, m.as_slice().to_vec())?;
    let perm: Vec<usize> = (0..n).flat_map(|k| [k, n + k]).collect();
    let merged: Vec<usize> = row_dims.iter().zip(col_dims).map(|(i, j)| i * j).collect();
    t.permute(&perm)?.into_reshape(&merged)
}

fn check_operand(a: &TtMatrix, dims: &[usize]) -> Result<()> {
    if a.col_dims() != dims {
        return Err(TensorError::DimensionMismatch(format!(
            "operator columns {:?} vs operand rows {:?}",
            a.col_dims(),
            dims
        )));
    }
    Ok(())
}

/// `y = A x` with slices `Y_i = sum_j A_{i,j} (x)_L X_j`; ranks `P_n R_n`.
/// With `fuse_eps` the product is rounded to that relative accuracy.
pub fn mpo_matvec(a: &TtMatrix, x: &TtTensor, fuse_eps: Option<f64>) -> Result<TtTensor> {
    check_operand(a, &x.dims())?;
    let cores = (0..a.order())
        .map(|n| {
            let (ad, xd) = (a.cores[n].dims(), x.cores()[n].dims());
            let xs: Vec<Matrix> = (0..xd[1]).map(|j| slice(&x.cores()[n], j)).collect();
            let slices: Vec<Matrix> = (0..ad[1])
                .map(|i| {
                    let mut acc = Matrix::zeros(ad[0] * xd[0], ad[3] * xd[2]);
                    for (j, xj) in xs.iter().enumerate() {
                        acc += kron_matrix(&a.slice(n, i, j), xj);
                    }
                    acc
                })
                .collect();
            core_from_slices(ad[0] * xd[0], ad[3] * xd[2], &slices)
        })
        .collect();
    let y = TtTensor::new(cores)?;
    match fuse_eps {
        Some(eps) => tt_round(&y, eps, None),
        None => Ok(y),
    }
}

/// `C = A B` core by core through the C product of block cores.
pub fn mpo_matmat(a: &TtMatrix, b: &TtMatrix) -> Result<TtMatrix> {
    check_operand(a, &b.row_dims())?;
    let cores = (0..a.order())
        .map(|n| {
            let prod = c_product(&a.block_core(n)?, &b.block_core(n)?)?;
            let (g0, g1) = prod.grid();
            let (bi, bk) = prod.block_dims();
            let mut data = vec![0.0; g0 * bi * bk * g1];
            for q in 0..g1 {
                for k in 0..bk {
                    for i in 0..bi {
                        for p in 0..g0 {
                            data[p + g0 * (i + bi * (k + bk * q))] = prod.block(p, q)[(i, k)];
                        }
                    }
                }
            }
            DenseTensor::new(vec![g0, bi, bk, g1], data)
        })
        .collect::<Result<Vec<_>>>()?;
    TtMatrix::new(cores)
}

/// `x^T A x`, through the TT product `y = A x`.
pub fn mpo_quadratic(a: &TtMatrix, x: &TtTensor) -> Result<f64> {
    let y = mpo_matvec(a, x, None)?;
    tt_inner(x, &y)
}
