//! Pluggable low-rank matrix factorizations `M ~ left * right^T`, used by the
//! Tucker and TT construction cascades.

use crate::error::{Result, TensorError};
use crate::linalg::{
    greedy_cross_pivots, mca_cur, randomized_svd, select_rank, truncated_svd, TruncationSpec,
};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankTarget {
    /// Frobenius residual budget.
    Tolerance(f64),
    Rank(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub left: Matrix,
    pub right: Matrix,
    pub residual: f64,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }
}

pub trait LowRankFactorizer {
    fn factorize(&self, m: &Matrix, target: RankTarget) -> Result<LowRankFactors>;
}

impl<F> LowRankFactorizer for F
where
    F: Fn(&Matrix, RankTarget) -> Result<LowRankFactors>,
{
    fn factorize(&self, m: &Matrix, target: RankTarget) -> Result<LowRankFactors> {
        self(m, target)
    }
}

/// Truncated SVD: `left = U`, `right = V S`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SvdFactorizer;

impl LowRankFactorizer for SvdFactorizer {
    fn factorize(&self, m: &Matrix, target: RankTarget) -> Result<LowRankFactors> {
        let spec = match target {
            RankTarget::Tolerance(e) => TruncationSpec::eps(e),
            RankTarget::Rank(r) => TruncationSpec::rank(r),
        };
        let svd = truncated_svd(m, spec)?;
        Ok(LowRankFactors {
            right: svd.svt().transpose(),
            left: svd.u,
            residual: svd.tail_energy.sqrt(),
        })
    }
}

/// Randomized SVD. Tolerance targets double the probe count until the
/// truncated residual meets the budget.
#[derive(Debug, Clone, Copy)]
pub struct RandomizedSvdFactorizer {
    pub oversample: usize,
    pub power: usize,
    pub seed: u64,
}

impl LowRankFactorizer for RandomizedSvdFactorizer {
    fn factorize(&self, m: &Matrix, target: RankTarget) -> Result<LowRankFactors> {
        let cap = m.nrows().min(m.ncols());
        let finish = |r_tilde: usize, keep: Option<usize>, eps: f64| -> Result<LowRankFactors> {
            let mut svd = randomized_svd(m, r_tilde, self.power, self.seed)?;
            let r = match keep {
                Some(r) => r.min(svd.rank()).max(1),
                None => select_rank(&svd.s, eps * eps, None),
            };
            svd.s.truncate(r);
            svd.u = svd.u.columns(0, r).into_owned();
            svd.v = svd.v.columns(0, r).into_owned();
            let residual = (m - svd.reconstruct()).norm();
            Ok(LowRankFactors {
                right: svd.svt().transpose(),
                left: svd.u,
                residual,
            })
        };
        match target {
            RankTarget::Rank(r) => finish((r + self.oversample).min(cap), Some(r), 0.0),
            RankTarget::Tolerance(eps) => {
                let mut r_tilde = (1 + self.oversample).min(cap);
                loop {
                    let f = finish(r_tilde, None, eps)?;
                    if f.residual <= eps || r_tilde == cap {
                        return Ok(f);
                    }
                    r_tilde = (2 * r_tilde).min(cap);
                }
            }
        }
    }
}

/// Cross (CUR) approximation with greedy pivots: `left = C`, `right = (U R)^T`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossFactorizer;

impl CrossFactorizer {
    fn at_rank(m: &Matrix, k: usize) -> Result<LowRankFactors> {
        let (rows, cols) = greedy_cross_pivots(m, k)?;
        let cur = mca_cur(m, &cols, &rows)?;
        Ok(LowRankFactors {
            right: (&cur.u * &cur.r).transpose(),
            left: cur.c,
            residual: cur.residual,
        })
    }
}

impl LowRankFactorizer for CrossFactorizer {
    fn factorize(&self, m: &Matrix, target: RankTarget) -> Result<LowRankFactors> {
        let cap = m.nrows().min(m.ncols());
        match target {
            RankTarget::Rank(r) => {
                if r == 0 {
                    return Err(TensorError::InvalidArgument("rank must be positive".into()));
                }
                CrossFactorizer::at_rank(m, r.min(cap))
            }
            RankTarget::Tolerance(eps) => {
                for k in 1..=cap {
                    let f = CrossFactorizer::at_rank(m, k)?;
                    if f.residual <= eps || k == cap {
                        return Ok(f);
                    }
                }
                Err(TensorError::InvalidArgument("empty matrix".into()))
            }
        }
    }
}
