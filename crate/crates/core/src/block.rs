//! Block matrices with equally sized blocks, plus the strong Kronecker and
//! core (C) products used by TT/MPO algebra.

use crate::error::{Result, TensorError};
use crate::ops::kron_matrix;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    grid: (usize, usize),
    block: (usize, usize),
    /// Blocks in row-major grid order.
    blocks: Vec<Matrix>,
}

impl BlockMatrix {
    pub fn new(grid: (usize, usize), blocks: Vec<Matrix>) -> Result<Self> {
        if grid.0 == 0 || grid.1 == 0 || blocks.len() != grid.0 * grid.1 {
            return Err(TensorError::InvalidShape(format!(
                "{} blocks cannot fill a {}x{} grid",
                blocks.len(),
                grid.0,
                grid.1
            )));
        }
        let block = blocks[0].shape();
        if blocks.iter().any(|b| b.shape() != block) {
            return Err(TensorError::InvalidShape("blocks differ in size".into()));
        }
        Ok(BlockMatrix {
            grid,
            block,
            blocks,
        })
    }

    pub fn from_fn(
        grid: (usize, usize),
        mut f: impl FnMut(usize, usize) -> Matrix,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(grid.0 * grid.1);
        for r in 0..grid.0 {
            for c in 0..grid.1 {
                blocks.push(f(r, c));
            }
        }
        BlockMatrix::new(grid, blocks)
    }

    /// Splits a flat matrix into a grid of equal blocks.
    pub fn from_matrix(m: &Matrix, grid: (usize, usize)) -> Result<Self> {
        if grid.0 == 0 || grid.1 == 0 || !m.nrows().is_multiple_of(grid.0) || !m.ncols().is_multiple_of(grid.1) {
            return Err(TensorError::InvalidShape(format!(
                "{}x{} matrix does not split into a {}x{} grid",
                m.nrows(),
                m.ncols(),
                grid.0,
                grid.1
            )));
        }
        let (bi, bj) = (m.nrows() / grid.0, m.ncols() / grid.1);
        BlockMatrix::from_fn(grid, |r, c| m.view((r * bi, c * bj), (bi, bj)).into_owned())
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn block_dims(&self) -> (usize, usize) {
        self.block
    }

    pub fn block(&self, r: usize, c: usize) -> &Matrix {
        &self.blocks[r * self.grid.1 + c]
    }

    pub fn to_matrix(&self) -> Matrix {
        let (bi, bj) = self.block;
        let mut m = Matrix::zeros(self.grid.0 * bi, self.grid.1 * bj);
        for r in 0..self.grid.0 {
            for c in 0..self.grid.1 {
                m.view_mut((r * bi, c * bj), (bi, bj))
                    .copy_from(self.block(r, c));
            }
        }
        m
    }
}

/// `C_{r1,r3} = sum_{r2} A_{r1,r2} (x)_L B_{r2,r3}`.
pub fn strong_kron(a: &BlockMatrix, b: &BlockMatrix) -> Result<BlockMatrix> {
    if a.grid.1 != b.grid.0 {
        return Err(TensorError::DimensionMismatch(format!(
            "grid {}x{} cannot be chained with grid {}x{}",
            a.grid.0, a.grid.1, b.grid.0, b.grid.1
        )));
    }
    let dims = (a.block.0 * b.block.0, a.block.1 * b.block.1);
    BlockMatrix::from_fn((a.grid.0, b.grid.1), |r1, r3| {
        let mut acc = Matrix::zeros(dims.0, dims.1);
        for r2 in 0..a.grid.1 {
            acc += kron_matrix(a.block(r1, r2), b.block(r2, r3));
        }
        acc
    })
}

/// Core product: `C_{q,q'} = A_{p,p'} B_{r,r'}` with `q = p + P r`, `q' = p' + P' r'`.
pub fn c_product(a: &BlockMatrix, b: &BlockMatrix) -> Result<BlockMatrix> {
    if a.block.1 != b.block.0 {
        return Err(TensorError::DimensionMismatch(format!(
            "blocks {}x{} and {}x{} cannot be multiplied",
            a.block.0, a.block.1, b.block.0, b.block.1
        )));
    }
    let (p, pp) = a.grid;
    BlockMatrix::from_fn((p * b.grid.0, pp * b.grid.1), |q, qq| {
        a.block(q % p, qq % pp) * b.block(q / p, qq / pp)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, Rng};

    #[test]
    fn one_by_one_grids() {
        let mut rng = Rng::new(1, 0);
        let a = gaussian_matrix(2, 3, &mut rng);
        let b = gaussian_matrix(3, 2, &mut rng);
        let ba = BlockMatrix::new((1, 1), vec![a.clone()]).unwrap();
        let bb = BlockMatrix::new((1, 1), vec![b.clone()]).unwrap();
        assert_eq!(strong_kron(&ba, &bb).unwrap().to_matrix(), b.kronecker(&a));
        assert_eq!(c_product(&ba, &bb).unwrap().to_matrix(), &a * &b);
    }

    #[test]
    fn split_and_flatten_round_trip() {
        let mut rng = Rng::new(2, 0);
        let m = gaussian_matrix(4, 6, &mut rng);
        let b = BlockMatrix::from_matrix(&m, (2, 3)).unwrap();
        assert_eq!(b.block_dims(), (2, 2));
        assert_eq!(b.to_matrix(), m);
    }
}
