//! Randomized multi-mode sketches with Tucker reconstruction, and fiber
//! sampling (tensor CUR) with max-modulus pivot selection.

use crate::error::{Result, TensorError};
use crate::linalg::{full_svd, pinv, thin_qr};
use crate::ops::mode_product;
use crate::rng::{gaussian_matrix, Rng};
use crate::tensor::{next_index, DenseTensor, Matrix};
use crate::tucker::TuckerTensor;
use log::warn;

pub const DEFAULT_OVERSAMPLE: usize = 1;

const TEST_MATRIX_STREAM: u64 = 0x0E6A;
const PINV_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Gaussian,
    /// Rows of `Q^T` from a Gaussian QR.
    Orthonormal,
    Rademacher,
    /// `s` random `+-1` entries per column.
    SparseRademacher(usize),
    /// `P F D` with an orthonormal DCT-II as `F`.
    Srft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestMatrixSpec {
    pub distribution: Distribution,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

/// One spec per mode with `rows = min(rank + oversample, dim)`; mode `n`
/// uses seed `seed + n * 2^32`.
pub fn sketch_specs(
    dims: &[usize],
    ranks: &[usize],
    distribution: Distribution,
    oversample: usize,
    seed: u64,
) -> Vec<TestMatrixSpec> {
    dims.iter()
        .zip(ranks)
        .enumerate()
        .map(|(n, (&d, &r))| TestMatrixSpec {
            distribution,
            rows: (r + oversample).min(d),
            cols: d,
            seed: seed.wrapping_add((n as u64) << 32),
        })
        .collect()
}

fn dct_ii(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |k, j| {
        let c = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        c * (std::f64::consts::PI * (j as f64 + 0.5) * k as f64 / n as f64).cos()
    })
}

/// `R x I` test matrix, deterministic per seed.
pub fn draw_test_matrix(spec: &TestMatrixSpec) -> Result<Matrix> {
    let (r, i) = (spec.rows, spec.cols);
    if r == 0 || i == 0 {
        return Err(TensorError::InvalidArgument(format!(
            "empty {r}x{i} test matrix"
        )));
    }
    let mut rng = Rng::new(spec.seed, TEST_MATRIX_STREAM);
    let needs_tall = matches!(
        spec.distribution,
        Distribution::Orthonormal | Distribution::Srft
    );
    if needs_tall && r > i {
        return Err(TensorError::InvalidArgument(format!(
            "{r} orthonormal rows do not fit in dimension {i}"
        )));
    }
    Ok(match spec.distribution {
        Distribution::Gaussian => gaussian_matrix(r, i, &mut rng),
        Distribution::Orthonormal => thin_qr(&gaussian_matrix(i, r, &mut rng)).0.transpose(),
        Distribution::Rademacher => Matrix::from_fn(r, i, |_, _| rng.sign()),
        Distribution::SparseRademacher(s) => {
            if s == 0 || s > r {
                return Err(TensorError::InvalidArgument(format!(
                    "{s} nonzeros per column with {r} rows"
                )));
            }
            let mut m = Matrix::zeros(r, i);
            for j in 0..i {
                for row in rng.sample_distinct(r, s) {
                    m[(row, j)] = rng.sign();
                }
            }
            m
        }
        Distribution::Srft => {
            let signs: Vec<f64> = (0..i).map(|_| rng.sign()).collect();
            let rows = rng.sample_distinct(i, r);
            let f = dct_ii(i);
            Matrix::from_fn(r, i, |a, j| f[(rows[a], j)] * signs[j])
        }
    })
}

#[derive(Debug, Clone)]
pub struct SketchSet {
    /// `T x_1 O_1 ... x_N O_N`.
    pub z: DenseTensor,
    /// `z_n[n]` skips the projection of mode `n`.
    pub z_n: Vec<DenseTensor>,
    pub specs: Vec<TestMatrixSpec>,
}

pub fn sketch(t: &DenseTensor, specs: &[TestMatrixSpec]) -> Result<SketchSet> {
    if specs.len() != t.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "{} specs for {} modes",
            specs.len(),
            t.order()
        )));
    }
    for (n, s) in specs.iter().enumerate() {
        if s.cols != t.dims()[n] {
            return Err(TensorError::DimensionMismatch(format!(
                "spec {n} has {} columns, mode size is {}",
                s.cols,
                t.dims()[n]
            )));
        }
    }
    let omegas = specs
        .iter()
        .map(draw_test_matrix)
        .collect::<Result<Vec<_>>>()?;
    let n_modes = t.order();
    let mut z_n = Vec::with_capacity(n_modes);
    for skip in 0..n_modes {
        let mut acc = t.clone();
        for (n, o) in omegas.iter().enumerate() {
            if n != skip {
                acc = mode_product(&acc, o, n)?;
            }
        }
        z_n.push(acc);
    }
    let z = mode_product(&z_n[n_modes - 1], &omegas[n_modes - 1], n_modes - 1)?;
    Ok(SketchSet {
        z,
        z_n,
        specs: specs.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct SketchReconstruction {
    pub tucker: TuckerTensor,
    /// `sigma_1 / sigma_min` of each `Z_(n)` (infinite when rank deficient).
    pub conditions: Vec<f64>,
    /// Numerical rank of each `Z_(n)` at the pseudo-inverse tolerance.
    pub numerical_ranks: Vec<usize>,
}

/// Tucker model `[[Z; B_1, .., B_N]]` with `B_n = [Z_n]_(n) Z_(n)^+`.
pub fn sketch_reconstruct(s: &SketchSet) -> Result<SketchReconstruction> {
    let n_modes = s.z.order();
    let mut factors = Vec::with_capacity(n_modes);
    let mut conditions = Vec::with_capacity(n_modes);
    let mut numerical_ranks = Vec::with_capacity(n_modes);
    for n in 0..n_modes {
        let zn = s.z.matricize_mode(n)?;
        let sv = full_svd(&zn)?.s;
        let rank = sv.iter().filter(|&&x| x > PINV_RCOND * sv[0]).count();
        let cond = match sv.last() {
            Some(&last) if sv.len() == zn.nrows() && last > 0.0 => sv[0] / last,
            _ => f64::INFINITY,
        };
        if rank < zn.nrows() {
            warn!("sketch: Z_({n}) has numerical rank {rank} < {}", zn.nrows());
        }
        conditions.push(cond);
        numerical_ranks.push(rank);
        factors.push(s.z_n[n].matricize_mode(n)? * pinv(&zn, PINV_RCOND)?);
    }
    let tucker = TuckerTensor::new(s.z.clone(), factors)?;
    Ok(SketchReconstruction {
        tucker,
        conditions,
        numerical_ranks,
    })
}

#[derive(Debug, Clone)]
pub struct FstdResult {
    /// Core `W`, factors `C^(n) W_(n)^+`.
    pub tucker: TuckerTensor,
    /// Fiber matrices `C^(n)` of size `I_n x prod_{m != n} |P_m|`.
    pub fibers: Vec<Matrix>,
    pub w: DenseTensor,
    /// Condition number of each `W_(n)`.
    pub conditions: Vec<f64>,
}

/// Subtensor of `t` keeping `sets[n]` in each mode, or the whole mode where
/// `sets[n]` is `None`.
fn subtensor(t: &DenseTensor, sets: &[Option<&[usize]>]) -> Result<DenseTensor> {
    let dims: Vec<usize> = sets
        .iter()
        .zip(t.dims())
        .map(|(s, &d)| s.map_or(d, |s| s.len()))
        .collect();
    DenseTensor::from_fn(&dims, |idx| {
        let src: Vec<usize> = idx
            .iter()
            .zip(sets)
            .map(|(&i, s)| s.map_or(i, |s| s[i]))
            .collect();
        t.get(&src).expect("indices validated")
    })
}

/// Fiber sampling Tucker decomposition from index sets `P_1, .., P_N`.
pub fn fstd(t: &DenseTensor, index_sets: &[Vec<usize>]) -> Result<FstdResult> {
    let n_modes = t.order();
    if index_sets.len() != n_modes {
        return Err(TensorError::DimensionMismatch(format!(
            "{} index sets for {} modes",
            index_sets.len(),
            n_modes
        )));
    }
    for (n, p) in index_sets.iter().enumerate() {
        if p.is_empty() {
            return Err(TensorError::InvalidArgument(format!(
                "index set {n} is empty"
            )));
        }
        if let Some(&bad) = p.iter().find(|&&i| i >= t.dims()[n]) {
            return Err(TensorError::IndexOutOfRange {
                mode: n,
                index: bad,
                size: t.dims()[n],
            });
        }
    }
    let all: Vec<Option<&[usize]>> = index_sets.iter().map(|p| Some(p.as_slice())).collect();
    let w = subtensor(t, &all)?;
    let mut fibers = Vec::with_capacity(n_modes);
    let mut factors = Vec::with_capacity(n_modes);
    let mut conditions = Vec::with_capacity(n_modes);
    for n in 0..n_modes {
        let mut sets = all.clone();
        sets[n] = None;
        let c = subtensor(t, &sets)?.matricize_mode(n)?;
        let wn = w.matricize_mode(n)?;
        let sv = full_svd(&wn)?.s;
        let last = sv[sv.len() - 1];
        let cond = if sv.len() == wn.nrows() && last > 0.0 {
            sv[0] / last
        } else {
            f64::INFINITY
        };
        if cond > 1e12 {
            warn!("FSTD: W_({n}) is ill-conditioned (condition {cond:.3e})");
        }
        conditions.push(cond);
        factors.push(&c * pinv(&wn, 1e-12)?);
        fibers.push(c);
    }
    let tucker = TuckerTensor::new(w.clone(), factors)?;
    Ok(FstdResult {
        tucker,
        fibers,
        w,
        conditions,
    })
}

/// Greedy max-modulus pivots with rank-1 cross deflation. Each pivot adds its
/// coordinates to every set that is not yet full; sets left short (e.g. for
/// a zero tensor) are completed with the smallest unused indices.
pub fn fiber_select_maxmod(t: &DenseTensor, sizes: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n_modes = t.order();
    if sizes.len() != n_modes {
        return Err(TensorError::DimensionMismatch(format!(
            "{} sizes for {} modes",
            sizes.len(),
            n_modes
        )));
    }
    for (n, (&s, &d)) in sizes.iter().zip(t.dims()).enumerate() {
        if s == 0 || s > d {
            return Err(TensorError::InvalidArgument(format!(
                "mode {n}: cannot pick {s} of {d} indices"
            )));
        }
    }
    let dims = t.dims().to_vec();
    let strides = t.shape().strides();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_modes];
    let mut resid = t.clone();
    let scale = t.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let full = |sets: &Vec<Vec<usize>>| sets.iter().zip(sizes).all(|(s, &k)| s.len() >= k);
    let budget = sizes.iter().sum::<usize>() * n_modes;
    for _ in 0..budget {
        if full(&sets) {
            break;
        }
        let (pos, piv) = resid
            .data()
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bp, bv), (p, &v)| {
                if v.abs() > bv.abs() {
                    (p, v)
                } else {
                    (bp, bv)
                }
            });
        if piv.abs() <= 1e-14 * scale || piv == 0.0 {
            break;
        }
        let mut pivot_idx = Vec::with_capacity(n_modes);
        let mut rem = pos;
        for &d in &dims {
            pivot_idx.push(rem % d);
            rem /= d;
        }
        for (n, &i) in pivot_idx.iter().enumerate() {
            if sets[n].len() < sizes[n] && !sets[n].contains(&i) {
                sets[n].push(i);
            }
        }
        // fibers of the residual through the pivot
        let fibers: Vec<Vec<f64>> = (0..n_modes)
            .map(|n| {
                let base = pos - pivot_idx[n] * strides[n];
                (0..dims[n])
                    .map(|i| resid.data()[base + i * strides[n]])
                    .collect()
            })
            .collect();
        let denom = piv.powi(n_modes as i32 - 1);
        let mut idx = vec![0; n_modes];
        let data = resid.data_mut();
        let mut p = 0;
        loop {
            let prod: f64 = idx.iter().enumerate().map(|(n, &i)| fibers[n][i]).product();
            data[p] -= prod / denom;
            p += 1;
            if !next_index(&mut idx, &dims) {
                break;
            }
        }
    }
    for (n, s) in sets.iter_mut().enumerate() {
        let mut i = 0;
        while s.len() < sizes[n] {
            if !s.contains(&i) {
                s.push(i);
            }
            i += 1;
        }
    }
    Ok(sets)
}
