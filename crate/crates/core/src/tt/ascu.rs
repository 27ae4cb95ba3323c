use super::{
    core_from, core_from_slices, left_unfold, right_unfold, slice, tt_norm, tt_orthogonalize,
    tt_round, tt_svd, TtTensor,
};
use crate::error::{Result, TensorError};
use crate::linalg::{full_svd, select_rank, thin_qr};
use crate::ops::mode_product;
use crate::tensor::{DenseTensor, Matrix};
use crate::tucker::{tucker2, Tucker2Options};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscuVariant {
    /// Tucker-2 split of each core, adjusting both adjacent ranks.
    TwoSide,
    /// Truncated SVD of each core, adjusting the rank in the sweep direction.
    OneSide,
}

#[derive(Debug, Clone)]
pub struct AscuOptions {
    pub max_sweeps: usize,
    /// Stop once ranks are stable and the error estimate moves less than
    /// `tol * ||T||` between sweeps.
    pub tol: f64,
    /// Inner Tucker-2 sweeps per core for [`AscuVariant::TwoSide`].
    pub inner_sweeps: usize,
    /// Starting train; defaults to TT-SVD (dense) or rounding (TT target).
    pub init: Option<TtTensor>,
}

impl Default for AscuOptions {
    fn default() -> Self {
        AscuOptions {
            max_sweeps: 10,
            tol: 1e-8,
            inner_sweeps: 3,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscuResult {
    pub tt: TtTensor,
    pub sweeps: usize,
    /// Error estimate `sqrt(||T||^2 - ||C||^2 + ||C - X_n||^2)` after each
    /// half sweep.
    pub error_history: Vec<f64>,
}

enum Target {
    Dense(DenseTensor),
    Tt(TtTensor),
}

impl Target {
    fn reversed(&self) -> Result<Target> {
        Ok(match self {
            Target::Dense(t) => {
                let perm: Vec<usize> = (0..t.order()).rev().collect();
                Target::Dense(t.permute(&perm)?)
            }
            Target::Tt(t) => Target::Tt(t.reverse()),
        })
    }

    fn dims(&self) -> Vec<usize> {
        match self {
            Target::Dense(t) => t.dims().to_vec(),
            Target::Tt(t) => t.dims(),
        }
    }
}

/// Left environment of the active core.
enum Env {
    /// `L^{<n}` as `R_{n-1} x (I_n ... I_N)`.
    Dense(Matrix),
    /// `R_{n-1} x S_{n-1}` contraction with the target train.
    Tt(Matrix),
}

/// Right environments for every position, computed from the current
/// right-orthogonal cores.
fn right_envs(x: &[DenseTensor], target: &Target) -> Vec<Matrix> {
    let n = x.len();
    let mut envs = vec![Matrix::from_element(1, 1, 1.0); n];
    match target {
        Target::Dense(_) => {
            // R_n x (I_{n+1} ... I_N)
            for k in (0..n - 1).rev() {
                let next = &x[k + 1];
                let m = left_unfold(next) * &envs[k + 1];
                envs[k] = Matrix::from_column_slice(
                    next.dims()[0],
                    m.len() / next.dims()[0],
                    m.as_slice(),
                );
            }
        }
        Target::Tt(t) => {
            for k in (0..n - 1).rev() {
                let (xc, tc) = (&x[k + 1], &t.cores()[k + 1]);
                let mut acc = Matrix::zeros(xc.dims()[0], tc.dims()[0]);
                for i in 0..xc.dims()[1] {
                    acc += slice(xc, i) * &envs[k + 1] * slice(tc, i).transpose();
                }
                envs[k] = acc;
            }
        }
    }
    envs
}

/// `C^(n)` as its left unfolding `(R_{n-1} I_n) x R_n`.
fn contracted(
    env: &Env,
    right: &Matrix,
    target: &Target,
    n: usize,
    dims: &[usize],
    r_prev: usize,
) -> Matrix {
    match (env, target) {
        (Env::Dense(l), _) => {
            let rows = r_prev * dims[n];
            let lr = Matrix::from_column_slice(rows, l.len() / rows, l.as_slice());
            lr * right.transpose()
        }
        (Env::Tt(el), Target::Tt(t)) => {
            let core = &t.cores()[n];
            let slices: Vec<Matrix> = (0..dims[n])
                .map(|i| el * slice(core, i) * right.transpose())
                .collect();
            left_unfold(&core_from_slices(r_prev, right.nrows(), &slices))
        }
        (Env::Tt(_), Target::Dense(_)) => unreachable!("environment kind follows the target"),
    }
}

fn advance(env: &Env, core: &DenseTensor, target: &Target, n: usize, dims: &[usize]) -> Env {
    match (env, target) {
        (Env::Dense(l), _) => {
            let rows = core.dims()[0] * dims[n];
            let lr = Matrix::from_column_slice(rows, l.len() / rows, l.as_slice());
            Env::Dense(left_unfold(core).transpose() * lr)
        }
        (Env::Tt(el), Target::Tt(t)) => {
            let tc = &t.cores()[n];
            let mut acc = Matrix::zeros(core.dims()[2], tc.dims()[2]);
            for i in 0..dims[n] {
                acc += slice(core, i).transpose() * el * slice(tc, i);
            }
            Env::Tt(acc)
        }
        (Env::Tt(_), Target::Dense(_)) => unreachable!("environment kind follows the target"),
    }
}

fn rotate_env(env: Env, a: &Matrix) -> Env {
    match env {
        Env::Dense(l) => Env::Dense(a.transpose() * l),
        Env::Tt(el) => Env::Tt(a.transpose() * el),
    }
}

/// One left-to-right pass over positions `0..N-1`. Expects a 0-orthogonal
/// train and leaves it (N-1)-orthogonal. Returns the last error estimate.
fn sweep(
    x: &mut [DenseTensor],
    target: &Target,
    norm_sq: f64,
    eps: f64,
    variant: AscuVariant,
    inner_sweeps: usize,
) -> Result<f64> {
    let n_modes = x.len();
    let dims = target.dims();
    let rights = right_envs(x, target);
    let mut env = match target {
        Target::Dense(t) => Env::Dense(Matrix::from_column_slice(1, t.numel(), t.data())),
        Target::Tt(_) => Env::Tt(Matrix::from_element(1, 1, 1.0)),
    };
    let guard = 64.0 * f64::EPSILON * norm_sq;
    let mut estimate = 0.0;
    for n in 0..n_modes - 1 {
        let r_prev = x[n].dims()[0];
        let c = contracted(&env, &rights[n], target, n, &dims, r_prev);
        let c_sq = c.norm_squared();
        let lost = (norm_sq - c_sq).max(0.0);
        let budget = (eps * eps - lost - guard).max(0.0);
        let next = x[n + 1].dims().to_vec();
        match variant {
            AscuVariant::OneSide => {
                let svd = full_svd(&c)?;
                let r = select_rank(&svd.s, budget, None);
                let tail: f64 = svd.s[r..].iter().map(|s| s * s).sum();
                estimate = lost + tail;
                let u = svd.u.columns(0, r).into_owned();
                let svt = Matrix::from_fn(r, svd.v.nrows(), |k, j| svd.s[k] * svd.v[(j, k)]);
                x[n] = core_from(&u, r_prev, dims[n], r);
                let absorbed = svt * right_unfold(&x[n + 1]);
                x[n + 1] = core_from(&absorbed, r, next[1], next[2]);
            }
            AscuVariant::TwoSide => {
                let r_next = c.ncols();
                let arranged = core_from(&c, r_prev, dims[n], r_next).permute(&[0, 2, 1])?;
                let opts = Tucker2Options {
                    max_sweeps: inner_sweeps.max(1),
                    ..Tucker2Options::default()
                };
                let split = tucker2(&arranged, budget.sqrt(), &opts)?;
                let approx = split.full()?;
                estimate = lost + arranged.sub(&approx)?.norm_sq();
                let mut core = split.core.permute(&[0, 2, 1])?;
                if n == 0 {
                    core = mode_product(&core, &split.a, 0)?;
                } else {
                    let pd = x[n - 1].dims().to_vec();
                    let prev = left_unfold(&x[n - 1]) * &split.a;
                    x[n - 1] = core_from(&prev, pd[0], pd[1], split.a.ncols());
                    env = rotate_env(env, &split.a);
                }
                let (q, r) = thin_qr(&left_unfold(&core));
                let cd = core.dims().to_vec();
                x[n] = core_from(&q, cd[0], cd[1], q.ncols());
                let absorbed = r * split.b.transpose() * right_unfold(&x[n + 1]);
                x[n + 1] = core_from(&absorbed, q.ncols(), next[1], next[2]);
            }
        }
        env = advance(&env, &x[n], target, n, &dims);
    }
    Ok(estimate.max(0.0).sqrt())
}

fn run(
    target: Target,
    norm_sq: f64,
    init: TtTensor,
    eps: f64,
    variant: AscuVariant,
    opts: &AscuOptions,
) -> Result<AscuResult> {
    if init.dims() != target.dims() {
        return Err(TensorError::DimensionMismatch(format!(
            "initial train has dims {:?}, target {:?}",
            init.dims(),
            target.dims()
        )));
    }
    let mut x = tt_orthogonalize(&init, 0)?;
    if x.order() == 1 {
        let mut history = Vec::new();
        let mut cores = x.into_cores();
        if let Target::Dense(t) = &target {
            cores[0] = t.reshape(&[1, t.numel(), 1])?;
        } else if let Target::Tt(t) = &target {
            cores[0] = t.cores()[0].clone();
        }
        history.push(0.0);
        return Ok(AscuResult {
            tt: TtTensor::from_parts(cores, Some(0)),
            sweeps: 0,
            error_history: history,
        });
    }
    let reversed = target.reversed()?;
    let mut history = Vec::new();
    let mut sweeps = 0;
    let mut last: Option<(Vec<usize>, f64)> = None;
    while sweeps < opts.max_sweeps.max(1) {
        sweeps += 1;
        let mut cores = x.into_cores();
        history.push(sweep(
            &mut cores,
            &target,
            norm_sq,
            eps,
            variant,
            opts.inner_sweeps,
        )?);
        let y = TtTensor::from_parts(cores, Some(init.order() - 1)).reverse();
        let mut cores = y.into_cores();
        let err = sweep(
            &mut cores,
            &reversed,
            norm_sq,
            eps,
            variant,
            opts.inner_sweeps,
        )?;
        history.push(err);
        x = TtTensor::from_parts(cores, Some(init.order() - 1)).reverse();
        let ranks = x.ranks();
        let stable = last
            .as_ref()
            .is_some_and(|(r, e)| *r == ranks && (e - err).abs() <= opts.tol * norm_sq.sqrt());
        last = Some((ranks, err));
        if stable {
            break;
        }
    }
    Ok(AscuResult {
        tt: x,
        sweeps,
        error_history: history,
    })
}

/// Alternating single-core update for a dense target with absolute error
/// budget `eps`.
pub fn ascu(
    t: &DenseTensor,
    eps: f64,
    variant: AscuVariant,
    opts: &AscuOptions,
) -> Result<AscuResult> {
    if !(eps >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "tolerance must be nonnegative, got {eps}"
        )));
    }
    let init = match &opts.init {
        Some(x) => x.clone(),
        None => tt_svd(t, eps, None)?,
    };
    run(
        Target::Dense(t.clone()),
        t.norm_sq(),
        init,
        eps,
        variant,
        opts,
    )
}

/// As [`ascu`], with the target itself given as a (higher-rank) train.
pub fn ascu_tt(
    t: &TtTensor,
    eps: f64,
    variant: AscuVariant,
    opts: &AscuOptions,
) -> Result<AscuResult> {
    if !(eps >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "tolerance must be nonnegative, got {eps}"
        )));
    }
    let norm = tt_norm(t)?;
    let init = match &opts.init {
        Some(x) => x.clone(),
        None if norm > 0.0 => tt_round(t, eps / norm, None)?,
        None => t.clone(),
    };
    run(Target::Tt(t.clone()), norm * norm, init, eps, variant, opts)
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::tt_add;
    use super::*;
    use crate::linalg::orthonormality_error;
    use crate::rng::{gaussian_tensor, Rng};

    fn smooth(dims: &[usize], rng: &mut Rng) -> DenseTensor {
        let noise = gaussian_tensor(dims, rng);
        DenseTensor::from_fn(dims, |i| {
            let s: f64 = i
                .iter()
                .enumerate()
                .map(|(k, &v)| (k + 1) as f64 * v as f64)
                .sum();
            1.0 / (1.0 + s) + 0.01 * noise.get(i).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn both_variants_respect_budget_and_ranks() {
        let mut rng = Rng::new(61, 0);
        for variant in [AscuVariant::OneSide, AscuVariant::TwoSide] {
            for _ in 0..4 {
                let t = smooth(&[4, 5, 4, 3], &mut rng);
                let eps = 0.05 * t.norm();
                let base = tt_svd(&t, eps, None).unwrap();
                let res = ascu(&t, eps, variant, &AscuOptions::default()).unwrap();
                let err = t.distance(&res.tt.full().unwrap()).unwrap();
                assert!(err <= eps, "{variant:?}: {err} > {eps}");
                assert!(res
                    .tt
                    .ranks()
                    .iter()
                    .zip(base.ranks())
                    .all(|(a, b)| *a <= b));
            }
        }
    }

    #[test]
    fn exact_ranks_are_captured() {
        let mut rng = Rng::new(62, 0);
        let t = random_tt(&[3, 4, 3], &[2, 2], &mut rng).full().unwrap();
        for variant in [AscuVariant::OneSide, AscuVariant::TwoSide] {
            let res = ascu(&t, 1e-10, variant, &AscuOptions::default()).unwrap();
            assert_eq!(res.tt.inner_ranks(), vec![2, 2]);
            assert!(t.distance(&res.tt.full().unwrap()).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn result_is_zero_orthogonal() {
        let mut rng = Rng::new(63, 0);
        let t = smooth(&[3, 4, 3, 3], &mut rng);
        let res = ascu(
            &t,
            0.1 * t.norm(),
            AscuVariant::TwoSide,
            &AscuOptions::default(),
        )
        .unwrap();
        for c in &res.tt.cores()[1..] {
            assert!(orthonormality_error(&right_unfold(c).transpose()) < 1e-10);
        }
    }

    #[test]
    fn train_target_matches_dense_target() {
        let mut rng = Rng::new(64, 0);
        let x = random_tt(&[3, 3, 3, 3], &[2, 3, 2], &mut rng);
        let inflated = tt_add(&x, &x).unwrap();
        let dense = inflated.full().unwrap();
        for variant in [AscuVariant::OneSide, AscuVariant::TwoSide] {
            let res = ascu_tt(
                &inflated,
                1e-9 * dense.norm(),
                variant,
                &AscuOptions::default(),
            )
            .unwrap();
            assert_eq!(res.tt.inner_ranks(), vec![2, 3, 2]);
            assert!(dense.distance(&res.tt.full().unwrap()).unwrap() <= 1e-9 * dense.norm());
        }
    }
}
