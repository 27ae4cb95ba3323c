//! Tucker format, HOSVD-family decompositions, Tucker-2 and PVD, and
//! arithmetic carried out directly on cores and factors.

use crate::error::{Result, TensorError};
use crate::linalg::{
    full_svd, orthonormality_error, pinv, select_rank, thin_qr, truncated_svd, TruncationSpec,
};
use crate::lrmf::{LowRankFactorizer, RankTarget};
use crate::ops::{
    self, khatri_rao, kron, kron_matrix, mode_product, mode_products, multilinear_product, Glue,
    KhatriRao,
};
use crate::rng::{gaussian_matrix, Rng};
use crate::tensor::{DenseTensor, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TuckerTensor {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    pub orthonormal: bool,
}

impl TuckerTensor {
    /// Validates dimensions; the orthonormal flag is derived from the factors.
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(TensorError::DimensionMismatch(format!(
                "{} factors for a core of order {}",
                factors.len(),
                core.order()
            )));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.ncols() != core.dims()[n] || f.nrows() == 0 {
                return Err(TensorError::DimensionMismatch(format!(
                    "factor {n} is {}x{} but core mode {n} has size {}",
                    f.nrows(),
                    f.ncols(),
                    core.dims()[n]
                )));
            }
        }
        let orthonormal = factors.iter().all(|f| orthonormality_error(f) <= 1e-10);
        Ok(TuckerTensor {
            core,
            factors,
            orthonormal,
        })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    pub fn param_count(&self) -> usize {
        self.core.numel() + self.factors.iter().map(|f| f.len()).sum::<usize>()
    }

    pub fn full(&self) -> Result<DenseTensor> {
        multilinear_product(&self.core, &self.factors)
    }
}

fn check_same_dims(x: &TuckerTensor, y: &TuckerTensor) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(TensorError::DimensionMismatch(format!(
            "shapes {:?} and {:?}",
            x.dims(),
            y.dims()
        )));
    }
    Ok(())
}

/// Sum: block-diagonal core and concatenated factors; ranks add.
pub fn tucker_add(x: &TuckerTensor, y: &TuckerTensor) -> Result<TuckerTensor> {
    check_same_dims(x, y)?;
    let core = ops::glue(&x.core, &y.core, Glue::DirectSum)?;
    let factors = x
        .factors
        .iter()
        .zip(&y.factors)
        .map(|(a, b)| {
            let mut m = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
            m.columns_mut(0, a.ncols()).copy_from(a);
            m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
            m
        })
        .collect();
    TuckerTensor::new(core, factors)
}

/// Left Kronecker product of the represented tensors.
pub fn tucker_kron(x: &TuckerTensor, y: &TuckerTensor) -> Result<TuckerTensor> {
    if x.order() != y.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "orders {} and {}",
            x.order(),
            y.order()
        )));
    }
    let core = kron(&x.core, &y.core)?;
    let factors = x
        .factors
        .iter()
        .zip(&y.factors)
        .map(|(a, b)| kron_matrix(a, b))
        .collect();
    TuckerTensor::new(core, factors)
}

/// Entrywise product: Kronecker core with rowwise Kronecker factors.
pub fn tucker_hadamard(x: &TuckerTensor, y: &TuckerTensor) -> Result<TuckerTensor> {
    check_same_dims(x, y)?;
    let core = kron(&x.core, &y.core)?;
    // rows A(i,:) (x)_L B(i,:) keep x's rank index fastest, matching the core
    let factors = x
        .factors
        .iter()
        .zip(&y.factors)
        .map(|(a, b)| khatri_rao(b, a, KhatriRao::Mode1))
        .collect::<Result<_>>()?;
    TuckerTensor::new(core, factors)
}

/// `<X, Y>` evaluated in core space.
pub fn tucker_inner(x: &TuckerTensor, y: &TuckerTensor) -> Result<f64> {
    check_same_dims(x, y)?;
    let w: Vec<Matrix> = x
        .factors
        .iter()
        .zip(&y.factors)
        .map(|(a, b)| b.transpose() * a)
        .collect();
    let projected = multilinear_product(&x.core, &w)?;
    ops::inner(&projected, &y.core)
}

pub fn tucker_norm(x: &TuckerTensor) -> Result<f64> {
    if x.orthonormal {
        Ok(x.core.norm())
    } else {
        Ok(tucker_inner(x, x)?.max(0.0).sqrt())
    }
}

/// Full N-D convolution: Kronecker core with columnwise-convolved factors.
pub fn tucker_convolve(x: &TuckerTensor, y: &TuckerTensor) -> Result<TuckerTensor> {
    if x.order() != y.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "orders {} and {}",
            x.order(),
            y.order()
        )));
    }
    let core = kron(&x.core, &y.core)?;
    let factors = x
        .factors
        .iter()
        .zip(&y.factors)
        .map(|(a, b)| {
            let (ra, rb) = (a.ncols(), b.ncols());
            let mut m = Matrix::zeros(a.nrows() + b.nrows() - 1, ra * rb);
            for q in 0..rb {
                for r in 0..ra {
                    for j in 0..b.nrows() {
                        for i in 0..a.nrows() {
                            m[(i + j, r + ra * q)] += a[(i, r)] * b[(j, q)];
                        }
                    }
                }
            }
            m
        })
        .collect();
    TuckerTensor::new(core, factors)
}

/// Applies `maps[n]` (of size `J_n x I_n`) to factor `n`.
pub fn tucker_modewise_transform(x: &TuckerTensor, maps: &[Matrix]) -> Result<TuckerTensor> {
    if maps.len() != x.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "{} maps for order {}",
            maps.len(),
            x.order()
        )));
    }
    let factors = maps
        .iter()
        .zip(&x.factors)
        .enumerate()
        .map(|(n, (m, f))| {
            if m.ncols() != f.nrows() {
                return Err(TensorError::DimensionMismatch(format!(
                    "map {n} has {} columns, mode size is {}",
                    m.ncols(),
                    f.nrows()
                )));
            }
            Ok(m * f)
        })
        .collect::<Result<_>>()?;
    TuckerTensor::new(x.core.clone(), factors)
}

/// Per-mode numerical rank: singular values of `X_(n)` above `tol * s_1`.
pub fn multilinear_rank(t: &DenseTensor, tol: f64) -> Result<Vec<usize>> {
    (0..t.order())
        .map(|n| {
            let s = full_svd(&t.matricize_mode(n)?)?.s;
            let cut = tol * s[0];
            Ok(s.iter().filter(|&&x| x > cut).count())
        })
        .collect()
}

fn sthosvd_with(
    t: &DenseTensor,
    spec_for: impl Fn(usize) -> TruncationSpec,
) -> Result<TuckerTensor> {
    let mut core = t.clone();
    let mut factors = Vec::with_capacity(t.order());
    for n in 0..t.order() {
        let svd = truncated_svd(&core.matricize_mode(n)?, spec_for(n))?;
        let mut dims = core.dims().to_vec();
        dims[n] = svd.rank();
        core = DenseTensor::fold_mode(&svd.svt(), n, &dims)?;
        factors.push(svd.u);
    }
    TuckerTensor::new(core, factors)
}

/// Sequentially truncated HOSVD with per-mode budget `eps / sqrt(N)`.
pub fn sthosvd(t: &DenseTensor, eps: f64) -> Result<TuckerTensor> {
    if !(eps >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "negative tolerance {eps}"
        )));
    }
    let per_mode = eps / (t.order().max(1) as f64).sqrt();
    sthosvd_with(t, |_| TruncationSpec::eps(per_mode))
}

/// Sequentially truncated HOSVD at prescribed multilinear ranks.
pub fn sthosvd_ranks(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerTensor> {
    check_ranks(t, ranks)?;
    sthosvd_with(t, |n| TruncationSpec::rank(ranks[n]))
}

fn check_ranks(t: &DenseTensor, ranks: &[usize]) -> Result<()> {
    if ranks.len() != t.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "{} ranks for order {}",
            ranks.len(),
            t.order()
        )));
    }
    for (n, (&r, &d)) in ranks.iter().zip(t.dims()).enumerate() {
        if r == 0 || r > d {
            return Err(TensorError::InvalidArgument(format!(
                "rank {r} for mode {n} of size {d}"
            )));
        }
    }
    Ok(())
}

/// `T x_p U_p^T` for every `p != skip`.
fn project_except(t: &DenseTensor, factors: &[Matrix], skip: usize) -> Result<DenseTensor> {
    let ts: Vec<Matrix> = factors.iter().map(|f| f.transpose()).collect();
    let ops: Vec<(usize, &Matrix)> = ts.iter().enumerate().filter(|(p, _)| *p != skip).collect();
    mode_products(t, &ops)
}

/// Leading `r` left singular vectors, i.e. leading eigenvectors of `M M^T`.
fn leading_subspace(m: &Matrix, r: usize) -> Result<Matrix> {
    let svd = full_svd(m)?;
    let mut u = Matrix::zeros(m.nrows(), r);
    let k = r.min(svd.rank());
    u.columns_mut(0, k).copy_from(&svd.u.columns(0, k));
    if k < r {
        // pad with an orthonormal complement when Z_(n) has too few columns
        let mut col = k;
        for j in 0..m.nrows() {
            if col == r {
                break;
            }
            let mut v = nalgebra::DVector::<f64>::zeros(m.nrows());
            v[j] = 1.0;
            for c in 0..col {
                let proj = u.column(c).dot(&v);
                v -= u.column(c) * proj;
            }
            let nrm = v.norm();
            if nrm > 1e-8 {
                u.column_mut(col).copy_from(&(v / nrm));
                col += 1;
            }
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HooiOptions {
    pub max_iters: usize,
    /// Stop once the cost decrease falls below `tol * ||T||^2`.
    pub tol: f64,
}

impl Default for HooiOptions {
    fn default() -> Self {
        HooiOptions {
            max_iters: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HooiResult {
    pub tucker: TuckerTensor,
    /// `||T||^2 - ||G||^2` after initialization and after every sweep.
    pub cost_history: Vec<f64>,
    pub sweeps: usize,
}

/// Higher-order orthogonal iteration initialized from STHOSVD.
pub fn hooi(t: &DenseTensor, ranks: &[usize], opts: &HooiOptions) -> Result<HooiResult> {
    let init = sthosvd_ranks(t, ranks)?;
    let norm2 = t.norm_sq();
    let mut factors = init.factors;
    let mut history = vec![norm2 - init.core.norm_sq()];
    let mut core = init.core;
    let mut sweeps = 0;
    for _ in 0..opts.max_iters {
        for n in 0..t.order() {
            let z = project_except(t, &factors, n)?;
            factors[n] = leading_subspace(&z.matricize_mode(n)?, ranks[n])?;
            if n + 1 == t.order() {
                core = mode_product(&z, &factors[n].transpose(), n)?;
            }
        }
        sweeps += 1;
        let cost = norm2 - core.norm_sq();
        let prev = *history.last().expect("history starts non-empty");
        history.push(cost);
        if prev - cost < opts.tol * norm2 {
            break;
        }
    }
    Ok(HooiResult {
        tucker: TuckerTensor::new(core, factors)?,
        cost_history: history,
        sweeps,
    })
}

/// HOOI with Gaussian initialization and randomized range finding; runs a
/// fixed number of sweeps.
pub fn hooi_randomized(
    t: &DenseTensor,
    ranks: &[usize],
    seed: u64,
    sweeps: usize,
) -> Result<TuckerTensor> {
    check_ranks(t, ranks)?;
    let mut rng = Rng::new(seed, 0x400);
    let mut factors: Vec<Matrix> = t
        .dims()
        .iter()
        .zip(ranks)
        .map(|(&d, &r)| gaussian_matrix(d, r, &mut rng))
        .collect();
    for _ in 0..sweeps {
        for n in 0..t.order() {
            let z = project_except(t, &factors, n)?.matricize_mode(n)?;
            let omega = gaussian_matrix(z.ncols(), ranks[n], &mut rng);
            let (q, _) = thin_qr(&(z * omega));
            factors[n] = q;
        }
    }
    if sweeps == 0 {
        factors = factors.iter().map(|f| thin_qr(f).0).collect();
    }
    let ts: Vec<Matrix> = factors.iter().map(|f| f.transpose()).collect();
    let core = multilinear_product(t, &ts)?;
    TuckerTensor::new(core, factors)
}

/// Tucker decomposition from a per-mode factorization of each unfolding; the
/// core is `T x_1 B_1^+ .. x_N B_N^+`.
pub fn tucker_via_lrmf(
    t: &DenseTensor,
    ranks: &[usize],
    lrmf: &dyn LowRankFactorizer,
) -> Result<TuckerTensor> {
    check_ranks(t, ranks)?;
    let mut factors = Vec::with_capacity(t.order());
    let mut pinvs = Vec::with_capacity(t.order());
    for n in 0..t.order() {
        let f = lrmf
            .factorize(&t.matricize_mode(n)?, RankTarget::Rank(ranks[n]))
            .map_err(|e| TensorError::Factorization {
                mode: n,
                reason: e.to_string(),
            })?;
        if f.left.nrows() != t.dims()[n] {
            return Err(TensorError::Factorization {
                mode: n,
                reason: format!(
                    "factor has {} rows, expected {}",
                    f.left.nrows(),
                    t.dims()[n]
                ),
            });
        }
        pinvs.push(pinv(&f.left, 1e-12)?);
        factors.push(f.left);
    }
    let core = multilinear_product(t, &pinvs)?;
    TuckerTensor::new(core, factors)
}

#[derive(Debug, Clone)]
pub struct Tucker2Result {
    pub a: Matrix,
    pub b: Matrix,
    pub core: DenseTensor,
    pub sweeps: usize,
}

impl Tucker2Result {
    pub fn full(&self) -> Result<DenseTensor> {
        mode_products(&self.core, &[(0, &self.a), (1, &self.b)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tucker2Options {
    pub max_sweeps: usize,
    /// Relative change of the retained energy that ends the iteration.
    pub tol: f64,
}

impl Default for Tucker2Options {
    fn default() -> Self {
        Tucker2Options {
            max_sweeps: 200,
            tol: 1e-10,
        }
    }
}

/// `||T - T x_n P P^T||_F^2`, evaluated directly.
fn projection_residual(t: &DenseTensor, p: &Matrix, n: usize) -> Result<f64> {
    let projected = mode_products(t, &[(n, &p.transpose()), (n, p)])?;
    Ok(t.sub(&projected)?.norm_sq())
}

fn check_order3(t: &DenseTensor) -> Result<()> {
    if t.order() != 3 {
        return Err(TensorError::InvalidArgument(format!(
            "expected an order-3 tensor, got order {}",
            t.order()
        )));
    }
    Ok(())
}

/// One half-step of Tucker-2: given the fixed factor on mode `other`, picks the
/// basis on mode `n` with the smallest rank that keeps the total error within
/// `eps`. Returns the basis and the retained energy.
fn tucker2_step(
    t: &DenseTensor,
    fixed: &Matrix,
    other: usize,
    n: usize,
    eps: f64,
) -> Result<(Matrix, f64)> {
    let lost = if fixed.nrows() == fixed.ncols() && orthonormality_error(fixed) < 1e-14 {
        0.0
    } else {
        projection_residual(t, fixed, other)?
    };
    let z = mode_product(t, &fixed.transpose(), other)?;
    let svd = full_svd(&z.matricize_mode(n)?)?;
    let r = select_rank(&svd.s, (eps * eps - lost).max(0.0), None);
    let retained = svd.s[..r].iter().map(|s| s * s).sum();
    Ok((svd.u.columns(0, r).into_owned(), retained))
}

/// Orthogonal Tucker-2 model `T ~ G x_1 A x_2 B` of an order-3 tensor with
/// ranks chosen from the error budget `eps`.
pub fn tucker2(t: &DenseTensor, eps: f64, opts: &Tucker2Options) -> Result<Tucker2Result> {
    check_order3(t)?;
    if !(eps >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "negative tolerance {eps}"
        )));
    }
    let norm2 = t.norm_sq();
    let mut a = Matrix::identity(t.dims()[0], t.dims()[0]);
    let mut b;
    let mut previous: Option<f64> = None;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        b = tucker2_step(t, &a, 0, 1, eps)?.0;
        let (a_new, retained) = tucker2_step(t, &b, 1, 0, eps)?;
        a = a_new;
        let done = previous
            .is_some_and(|p| (retained - p).abs() <= opts.tol * norm2.max(f64::MIN_POSITIVE));
        previous = Some(retained);
        if done || sweeps >= opts.max_sweeps {
            break;
        }
    }
    let core = mode_products(t, &[(0, &a.transpose()), (1, &b.transpose())])?;
    Ok(Tucker2Result { a, b, core, sweeps })
}

/// Tucker-2 at fixed ranks `(r1, r2)`, optionally starting from a given `A`.
pub fn tucker2_fixed(
    t: &DenseTensor,
    r1: usize,
    r2: usize,
    init_a: Option<&Matrix>,
    sweeps: usize,
) -> Result<Tucker2Result> {
    check_order3(t)?;
    check_ranks(t, &[r1, r2, t.dims()[2]])?;
    let mut a = match init_a {
        Some(a0) => a0.clone(),
        None => sthosvd_ranks(t, &[r1, r2, t.dims()[2]])?.factors[0].clone(),
    };
    let mut b = Matrix::zeros(t.dims()[1], r2);
    for _ in 0..sweeps.max(1) {
        let z = mode_product(t, &a.transpose(), 0)?;
        b = leading_subspace(&z.matricize_mode(1)?, r2)?;
        let z = mode_product(t, &b.transpose(), 1)?;
        a = leading_subspace(&z.matricize_mode(0)?, r1)?;
    }
    let core = mode_products(t, &[(0, &a.transpose()), (1, &b.transpose())])?;
    Ok(Tucker2Result {
        a,
        b,
        core,
        sweeps: sweeps.max(1),
    })
}

#[derive(Debug, Clone)]
pub struct PvdResult {
    pub a: Matrix,
    pub b: Matrix,
    pub cores: Vec<Matrix>,
}

/// Population value decomposition of equally sized slices.
pub fn pvd(slices: &[Matrix], r: usize, r1: usize, r2: usize) -> Result<PvdResult> {
    let first = slices
        .first()
        .ok_or_else(|| TensorError::InvalidArgument("no slices".into()))?;
    let (rows, cols) = first.shape();
    if slices.iter().any(|s| s.shape() != (rows, cols)) {
        return Err(TensorError::DimensionMismatch(
            "slices differ in shape".into(),
        ));
    }
    if r == 0 || r1 == 0 || r2 == 0 {
        return Err(TensorError::InvalidArgument(
            "ranks must be positive".into(),
        ));
    }
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for s in slices {
        let svd = truncated_svd(s, TruncationSpec::rank(r))?;
        us.push(svd.us());
        vs.push(svd.svt().transpose());
    }
    let stack = |parts: &[Matrix], n: usize| {
        let total: usize = parts.iter().map(|p| p.ncols()).sum();
        let mut m = Matrix::zeros(n, total);
        let mut off = 0;
        for p in parts {
            m.columns_mut(off, p.ncols()).copy_from(p);
            off += p.ncols();
        }
        m
    };
    let a = leading_subspace(&stack(&us, rows), r1.min(rows))?;
    let b = leading_subspace(&stack(&vs, cols), r2.min(cols))?;
    let cores = slices.iter().map(|x| a.transpose() * x * &b).collect();
    Ok(PvdResult { a, b, cores })
}
