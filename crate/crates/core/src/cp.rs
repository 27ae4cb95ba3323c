//! CP (Kruskal) format and alternating least squares.

use crate::error::{Result, TensorError};
use crate::linalg::pinv;
use crate::ops::{khatri_rao, KhatriRao};
use crate::rng::{gaussian_matrix, Rng};
use crate::tensor::{DenseTensor, Matrix};
use log::warn;

#[derive(Debug, Clone, PartialEq)]
pub struct KruskalTensor {
    pub weights: Vec<f64>,
    pub factors: Vec<Matrix>,
    pub normalized: bool,
}

impl KruskalTensor {
    pub fn new(weights: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        let r = weights.len();
        if let Some(n) = factors
            .iter()
            .position(|f| f.ncols() != r || f.nrows() == 0)
        {
            return Err(TensorError::DimensionMismatch(format!(
                "factor {n} is {}x{}, expected {r} columns",
                factors[n].nrows(),
                factors[n].ncols()
            )));
        }
        let normalized = factors
            .iter()
            .all(|f| f.column_iter().all(|c| (c.norm() - 1.0).abs() <= 1e-10));
        Ok(KruskalTensor {
            weights,
            factors,
            normalized,
        })
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn full(&self) -> Result<DenseTensor> {
        let dims = self.dims();
        if self.factors.is_empty() {
            return Ok(DenseTensor::scalar(self.weights.iter().sum()));
        }
        let mut kr = self.factors[0].clone();
        for f in &self.factors[1..] {
            kr = khatri_rao(&kr, f, KhatriRao::Left)?;
        }
        let lambda = Matrix::from_column_slice(self.rank(), 1, &self.weights);
        DenseTensor::new(dims, (kr * lambda).as_slice().to_vec())
    }

    pub fn eval(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order() {
            return Err(TensorError::IndexArity {
                expected: self.order(),
                got: idx.len(),
            });
        }
        for (mode, (&i, f)) in idx.iter().zip(&self.factors).enumerate() {
            if i >= f.nrows() {
                return Err(TensorError::IndexOutOfRange {
                    mode,
                    index: i,
                    size: f.nrows(),
                });
            }
        }
        Ok((0..self.rank())
            .map(|r| {
                self.weights[r]
                    * idx
                        .iter()
                        .zip(&self.factors)
                        .map(|(&i, f)| f[(i, r)])
                        .product::<f64>()
            })
            .sum())
    }

    /// Moves column norms of every factor into the weights.
    pub fn normalize(&mut self) {
        for f in &mut self.factors {
            for (r, mut col) in f.column_iter_mut().enumerate() {
                let nrm = col.norm();
                if nrm > 0.0 {
                    col /= nrm;
                    self.weights[r] *= nrm;
                }
            }
        }
        self.normalized = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpAlsOptions {
    pub max_iters: usize,
    pub fit_tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for CpAlsOptions {
    fn default() -> Self {
        CpAlsOptions {
            max_iters: 200,
            fit_tol: 1e-8,
            seed: 0,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CpAlsResult {
    pub tensor: KruskalTensor,
    pub fit: f64,
    /// Fit after each sweep of the returned restart.
    pub fit_history: Vec<f64>,
    pub converged: bool,
}

/// `1 - ||T - X|| / ||T||`.
pub fn cp_fit(t: &DenseTensor, k: &KruskalTensor) -> Result<f64> {
    let norm = t.norm();
    let resid = t.distance(&k.full()?)?;
    Ok(if norm > 0.0 {
        1.0 - resid / norm
    } else if resid == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    })
}

/// Khatri-Rao product of all factors except `skip`, rows merged little-endian.
fn khatri_rao_except(factors: &[Matrix], skip: usize) -> Result<Matrix> {
    let mut acc: Option<Matrix> = None;
    for (k, f) in factors.iter().enumerate() {
        if k == skip {
            continue;
        }
        acc = Some(match acc {
            None => f.clone(),
            Some(a) => khatri_rao(&a, f, KhatriRao::Left)?,
        });
    }
    Ok(acc.unwrap_or_else(|| Matrix::from_element(1, factors[skip].ncols(), 1.0)))
}

/// Pseudo-inverse of the Hadamard Gram matrix, Tikhonov-regularized when it is
/// numerically singular.
fn gram_inverse(v: &Matrix) -> Result<Matrix> {
    let eig = v.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return Ok(Matrix::zeros(v.nrows(), v.ncols()));
    }
    if min <= 1e-12 * max {
        warn!(
            "CP-ALS: Hadamard Gram matrix is singular (min/max eigenvalue {:.3e}); regularizing",
            min / max
        );
        let reg = v + Matrix::identity(v.nrows(), v.ncols()) * (1e-12 * max);
        return pinv(&reg, 0.0);
    }
    pinv(v, 0.0)
}

fn als_run(
    t: &DenseTensor,
    rank: usize,
    opts: &CpAlsOptions,
    rng: &mut Rng,
) -> Result<CpAlsResult> {
    let n_modes = t.order();
    let unfoldings: Vec<Matrix> = (0..n_modes)
        .map(|n| t.matricize_mode(n))
        .collect::<Result<_>>()?;
    let mut factors: Vec<Matrix> = t
        .dims()
        .iter()
        .map(|&d| gaussian_matrix(d, rank, rng))
        .collect();
    for f in &mut factors {
        for mut c in f.column_iter_mut() {
            let nrm = c.norm();
            if nrm > 0.0 {
                c /= nrm;
            }
        }
    }
    let mut weights = vec![1.0; rank];
    let mut grams: Vec<Matrix> = factors.iter().map(|f| f.transpose() * f).collect();
    let mut history = Vec::new();
    let mut fit_old = f64::NEG_INFINITY;
    let mut converged = false;
    let mut model = KruskalTensor {
        weights: weights.clone(),
        factors: factors.clone(),
        normalized: true,
    };
    for _ in 0..opts.max_iters {
        for n in 0..n_modes {
            let mut v = Matrix::from_element(rank, rank, 1.0);
            for (k, g) in grams.iter().enumerate() {
                if k != n {
                    v.component_mul_assign(g);
                }
            }
            let mttkrp = &unfoldings[n] * khatri_rao_except(&factors, n)?;
            let mut b = mttkrp * gram_inverse(&v)?;
            for (r, mut col) in b.column_iter_mut().enumerate() {
                let nrm = col.norm();
                if nrm > 0.0 {
                    col /= nrm;
                }
                if n + 1 == n_modes {
                    weights[r] = nrm;
                }
            }
            grams[n] = b.transpose() * &b;
            factors[n] = b;
        }
        model = KruskalTensor {
            weights: weights.clone(),
            factors: factors.clone(),
            normalized: true,
        };
        let fit = cp_fit(t, &model)?;
        history.push(fit);
        if (fit - fit_old).abs() < opts.fit_tol {
            converged = true;
            break;
        }
        fit_old = fit;
    }
    let fit = history.last().copied().unwrap_or(f64::NEG_INFINITY);
    Ok(CpAlsResult {
        tensor: model,
        fit,
        fit_history: history,
        converged,
    })
}

/// Rank-`rank` CP decomposition by ALS; the best of `opts.restarts` random
/// initializations is returned.
pub fn cp_als(t: &DenseTensor, rank: usize, opts: &CpAlsOptions) -> Result<CpAlsResult> {
    if rank == 0 {
        return Err(TensorError::InvalidArgument(
            "CP rank must be at least 1".into(),
        ));
    }
    if t.order() == 0 {
        return Err(TensorError::InvalidArgument(
            "CP of a scalar is undefined".into(),
        ));
    }
    let mut best: Option<CpAlsResult> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = Rng::new(opts.seed, 0xC9 + restart as u64);
        let run = als_run(t, rank, opts, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.fit > b.fit) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
