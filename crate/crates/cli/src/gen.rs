//! Synthetic tensor families for exercising the decompositions.

use tnet_core::rng::{gaussian_matrix, gaussian_tensor, Rng};
use tnet_core::tensor::next_index;
use tnet_core::tt::TtTensor;
use tnet_core::tucker::TuckerTensor;
use tnet_core::{DenseTensor, Result, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    /// Densified train with Gaussian cores and the given inner ranks.
    RandTt,
    /// Gaussian core times Gaussian factors with the given multilinear ranks.
    RandTucker,
    /// Outer product of Gaussian vectors.
    Rank1,
    /// `1 / (i_1 + .. + i_N - N + 1)` on one-based indices.
    Hilbert,
    /// The linear (little-endian) index `k` of each entry.
    Ramp,
    /// `rho^k` with `k` the linear index.
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub rho: f64,
}

const GEN_STREAM: u64 = 0x6E;

fn bad(msg: String) -> TensorError {
    TensorError::InvalidArgument(msg)
}

/// Largest rank a train bond can carry between modes `..=n` and `n + 1..`.
fn tt_rank_bound(dims: &[usize], n: usize) -> usize {
    let left = dims[..=n]
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .unwrap_or(usize::MAX);
    let right = dims[n + 1..]
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .unwrap_or(usize::MAX);
    left.min(right)
}

pub fn gen_synthetic(kind: GenKind, p: &GenParams, seed: u64) -> Result<DenseTensor> {
    if p.dims.is_empty() {
        return Err(bad("at least one mode size is required".into()));
    }
    let mut rng = Rng::new(seed, GEN_STREAM);
    match kind {
        GenKind::RandTt => {
            let n = p.dims.len();
            if p.ranks.len() + 1 != n {
                return Err(bad(format!(
                    "rand-tt over {n} modes needs {} inner ranks, got {}",
                    n - 1,
                    p.ranks.len()
                )));
            }
            for (k, &r) in p.ranks.iter().enumerate() {
                let bound = tt_rank_bound(&p.dims, k);
                if r == 0 || r > bound {
                    return Err(bad(format!(
                        "rank {r} at bond {} exceeds the dimension bound {bound}",
                        k + 1
                    )));
                }
            }
            let mut full = vec![1];
            full.extend_from_slice(&p.ranks);
            full.push(1);
            let cores = p
                .dims
                .iter()
                .enumerate()
                .map(|(k, &d)| gaussian_tensor(&[full[k], d, full[k + 1]], &mut rng))
                .collect();
            TtTensor::new(cores)?.full()
        }
        GenKind::RandTucker => {
            if p.ranks.len() != p.dims.len() {
                return Err(bad(format!(
                    "rand-tucker needs one rank per mode, got {}",
                    p.ranks.len()
                )));
            }
            for (n, (&r, &d)) in p.ranks.iter().zip(&p.dims).enumerate() {
                if r == 0 || r > d {
                    return Err(bad(format!("rank {r} exceeds mode {n} size {d}")));
                }
            }
            let core = gaussian_tensor(&p.ranks, &mut rng);
            let factors = p
                .dims
                .iter()
                .zip(&p.ranks)
                .map(|(&d, &r)| gaussian_matrix(d, r, &mut rng))
                .collect();
            TuckerTensor::new(core, factors)?.full()
        }
        GenKind::Rank1 => {
            let vs: Vec<Vec<f64>> = p
                .dims
                .iter()
                .map(|&d| (0..d).map(|_| rng.gaussian()).collect())
                .collect();
            DenseTensor::from_fn(&p.dims, |idx| {
                idx.iter().zip(&vs).map(|(&i, v)| v[i]).product()
            })
        }
        GenKind::Hilbert => {
            DenseTensor::from_fn(&p.dims, |idx| 1.0 / (idx.iter().sum::<usize>() + 1) as f64)
        }
        GenKind::Ramp | GenKind::Geometric => {
            let numel = p.dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let numel = numel.ok_or_else(|| bad("element count overflows".into()))?;
            let data = match kind {
                GenKind::Ramp => (0..numel).map(|k| k as f64).collect(),
                _ => {
                    let mut x = 1.0;
                    (0..numel)
                        .map(|_| {
                            let v = x;
                            x *= p.rho;
                            v
                        })
                        .collect()
                }
            };
            DenseTensor::new(p.dims.clone(), data)
        }
    }
}

/// Every multi-index of `dims` in little-endian order, for brute-force checks.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut idx = vec![0; dims.len()];
    let mut out = Vec::new();
    loop {
        out.push(idx.clone());
        if !next_index(&mut idx, dims) {
            return out;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dims: &[usize], ranks: &[usize]) -> GenParams {
        GenParams {
            dims: dims.to_vec(),
            ranks: ranks.to_vec(),
            rho: 0.9,
        }
    }

    #[test]
    fn hilbert_entries() {
        let t = gen_synthetic(GenKind::Hilbert, &params(&[3, 4], &[]), 0).unwrap();
        for idx in all_indices(&[3, 4]) {
            let one_based: usize = idx.iter().map(|i| i + 1).sum();
            assert_eq!(t.get(&idx).unwrap(), 1.0 / (one_based - 2 + 1) as f64);
        }
    }

    #[test]
    fn ramp_and_geometric_follow_linear_index() {
        let r = gen_synthetic(GenKind::Ramp, &params(&[2, 3], &[]), 0).unwrap();
        assert_eq!(r.get(&[1, 2]).unwrap(), 5.0);
        let g = gen_synthetic(GenKind::Geometric, &params(&[4], &[]), 0).unwrap();
        assert_eq!(g.data(), &[1.0, 0.9, 0.9 * 0.9, 0.9 * 0.9 * 0.9]);
    }

    #[test]
    fn seeded_families_are_deterministic() {
        for kind in [GenKind::RandTt, GenKind::RandTucker, GenKind::Rank1] {
            let ranks = match kind {
                GenKind::RandTt => vec![2, 2],
                GenKind::RandTucker => vec![2, 2, 2],
                _ => vec![],
            };
            let p = params(&[3, 4, 3], &ranks);
            assert_eq!(
                gen_synthetic(kind, &p, 5).unwrap(),
                gen_synthetic(kind, &p, 5).unwrap()
            );
            assert_ne!(
                gen_synthetic(kind, &p, 5).unwrap(),
                gen_synthetic(kind, &p, 6).unwrap()
            );
        }
    }

    #[test]
    fn rank_bounds_enforced() {
        assert!(gen_synthetic(GenKind::RandTt, &params(&[2, 3, 2], &[3, 2]), 0).is_err());
        assert!(gen_synthetic(GenKind::RandTt, &params(&[2, 3, 2], &[2]), 0).is_err());
        assert!(gen_synthetic(GenKind::RandTucker, &params(&[2, 3], &[3, 1]), 0).is_err());
    }
}
