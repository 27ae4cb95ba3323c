use super::{core_from, TtTensor};
use crate::error::{Result, TensorError};
use crate::linalg::{orthonormality_error, truncated_svd, TruncationSpec};
use crate::lrmf::{LowRankFactorizer, RankTarget};
use crate::tensor::{DenseTensor, Matrix};
use crate::tucker::{tucker2, Tucker2Options};

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "tolerance must be nonnegative, got {eps}"
        )));
    }
    Ok(())
}

fn per_step(eps: f64, steps: usize) -> f64 {
    if steps == 0 {
        eps
    } else {
        eps / (steps as f64).sqrt()
    }
}

/// TT-SVD with absolute budget `eps`, split evenly over the `N - 1` splits.
/// The result is left-orthogonal.
pub fn tt_svd(t: &DenseTensor, eps: f64, max_rank: Option<usize>) -> Result<TtTensor> {
    check_eps(eps)?;
    if t.order() == 0 {
        return Err(TensorError::InvalidArgument(
            "TT of a scalar is undefined".into(),
        ));
    }
    let dims = t.dims().to_vec();
    let n = dims.len();
    let spec = TruncationSpec::eps(per_step(eps, n - 1)).with_max_rank(max_rank);
    let mut cores = Vec::with_capacity(n);
    let mut rest = t.data().to_vec();
    let mut r = 1;
    for (k, &d) in dims[..n - 1].iter().enumerate() {
        let rows = r * d;
        let c = Matrix::from_column_slice(rows, rest.len() / rows, &rest);
        let svd = truncated_svd(&c, spec).map_err(|e| mode_error(k, e))?;
        let r_new = svd.rank();
        cores.push(core_from(&svd.u, r, d, r_new));
        rest = svd.svt().as_slice().to_vec();
        r = r_new;
    }
    cores.push(DenseTensor::new(vec![r, dims[n - 1], 1], rest)?);
    Ok(TtTensor::from_parts(cores, Some(n - 1)))
}

fn mode_error(mode: usize, e: TensorError) -> TensorError {
    match e {
        TensorError::Factorization { reason, .. } => TensorError::Factorization { mode, reason },
        other => TensorError::Factorization {
            mode,
            reason: other.to_string(),
        },
    }
}

/// TT cascade with a user-supplied factorization `M ~ A B^T` at each split,
/// each asked for residual `eps / sqrt(N - 1)`.
pub fn tt_lrmf(t: &DenseTensor, lrmf: &dyn LowRankFactorizer, eps: f64) -> Result<TtTensor> {
    check_eps(eps)?;
    if t.order() == 0 {
        return Err(TensorError::InvalidArgument(
            "TT of a scalar is undefined".into(),
        ));
    }
    let dims = t.dims().to_vec();
    let n = dims.len();
    let delta = per_step(eps, n - 1);
    let mut cores = Vec::with_capacity(n);
    let mut rest = t.data().to_vec();
    let mut r = 1;
    let mut left_orthogonal = true;
    for (k, &d) in dims[..n - 1].iter().enumerate() {
        let rows = r * d;
        let c = Matrix::from_column_slice(rows, rest.len() / rows, &rest);
        let f = lrmf
            .factorize(&c, RankTarget::Tolerance(delta))
            .map_err(|e| mode_error(k, e))?;
        if f.left.nrows() != rows
            || f.right.nrows() != c.ncols()
            || f.left.ncols() != f.right.ncols()
        {
            return Err(TensorError::Factorization {
                mode: k,
                reason: format!(
                    "factorization returned {}x{} and {}x{} factors for a {}x{} matrix",
                    f.left.nrows(),
                    f.left.ncols(),
                    f.right.nrows(),
                    f.right.ncols(),
                    rows,
                    c.ncols()
                ),
            });
        }
        left_orthogonal &= orthonormality_error(&f.left) <= 1e-10;
        let r_new = f.left.ncols();
        cores.push(core_from(&f.left, r, d, r_new));
        rest = f.right.transpose().as_slice().to_vec();
        r = r_new;
    }
    cores.push(DenseTensor::new(vec![r, dims[n - 1], 1], rest)?);
    Ok(TtTensor::from_parts(
        cores,
        left_orthogonal.then_some(n - 1),
    ))
}

/// TT by repeated Tucker-2 splits: the outermost remaining modes become the
/// factor matrices and the recursion continues on the Tucker-2 core.
pub fn tt_via_tucker2(t: &DenseTensor, eps: f64) -> Result<TtTensor> {
    check_eps(eps)?;
    if t.order() == 0 {
        return Err(TensorError::InvalidArgument(
            "TT of a scalar is undefined".into(),
        ));
    }
    let n = t.order();
    let calls = n / 2;
    let delta = per_step(eps, calls);
    let opts = Tucker2Options::default();
    let mut slots: Vec<Option<DenseTensor>> = vec![None; n];
    // state: (R_left, R_right, I_l, ..., I_r)
    let mut dims = vec![1, 1];
    dims.extend_from_slice(t.dims());
    let mut g = t.reshape(&dims)?;
    let (mut lo, mut hi) = (0usize, n - 1);
    loop {
        let d = g.dims().to_vec();
        let (rl, rr) = (d[0], d[1]);
        let c = hi + 1 - lo;
        if c == 1 {
            slots[lo] = Some(g.permute(&[0, 2, 1])?);
            break;
        }
        let (il, ir) = (d[2], d[d.len() - 1]);
        let mids = &d[3..d.len() - 1];
        let mid: usize = mids.iter().product();
        let mut perm = vec![0, 2, d.len() - 1, 1];
        perm.extend(3..d.len() - 1);
        let arranged = g.permute(&perm)?.into_reshape(&[rl * il, ir * rr, mid])?;
        let split = tucker2(&arranged, delta, &opts)?;
        let (ra, rb) = (split.a.ncols(), split.b.ncols());
        slots[lo] = Some(core_from(&split.a, rl, il, ra));
        if c == 2 {
            let core = split.core.reshape(&[ra, rb])?.to_matrix()?;
            slots[hi] = Some(core_from(&(core * split.b.transpose()), ra, ir, rr));
            break;
        }
        slots[hi] = Some(core_from(&split.b.transpose(), rb, ir, rr));
        let mut next = vec![ra, rb];
        next.extend_from_slice(mids);
        g = split.core.into_reshape(&next)?;
        lo += 1;
        hi -= 1;
    }
    TtTensor::new(
        slots
            .into_iter()
            .map(|c| c.expect("every slot filled"))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::linalg::full_svd;
    use crate::lrmf::{CrossFactorizer, RandomizedSvdFactorizer, SvdFactorizer};
    use crate::rng::{gaussian_tensor, Rng};
    use crate::tucker::tucker2;

    #[test]
    fn rank_one_input_gives_unit_ranks() {
        let t = DenseTensor::from_fn(&[3, 4, 2, 3], |i| {
            i.iter().map(|&k| (k + 1) as f64).product()
        })
        .unwrap();
        let x = tt_svd(&t, 1e-10, None).unwrap();
        assert_eq!(x.inner_ranks(), vec![1, 1, 1]);
        assert!(t.distance(&x.full().unwrap()).unwrap() <= 1e-12 * t.norm());
    }

    #[test]
    fn recovers_construction_ranks() {
        let mut rng = Rng::new(11, 0);
        let x = random_tt(&[3, 4, 4, 3], &[2, 3, 2], &mut rng);
        let t = x.full().unwrap();
        let y = tt_svd(&t, 1e-10, None).unwrap();
        assert_eq!(y.inner_ranks(), vec![2, 3, 2]);
        assert_eq!(y.ortho_center(), Some(3));
    }

    #[test]
    fn error_within_budget_and_tail_bound() {
        let mut rng = Rng::new(12, 0);
        let t = gaussian_tensor(&[5, 5, 5, 5], &mut rng);
        let eps = 0.2 * t.norm();
        let x = tt_svd(&t, eps, None).unwrap();
        let err = t.distance(&x.full().unwrap()).unwrap();
        let mut bound = 0.0;
        for (k, &r) in x.inner_ranks().iter().enumerate() {
            let s = full_svd(&t.matricize_canonical(k + 1).unwrap()).unwrap().s;
            bound += s[r..].iter().map(|v| v * v).sum::<f64>();
        }
        assert!(err <= eps, "{err} > {eps}");
        assert!(err * err <= bound + 1e-9);
    }

    #[test]
    fn max_rank_caps() {
        let mut rng = Rng::new(13, 0);
        let t = gaussian_tensor(&[4, 4, 4], &mut rng);
        let x = tt_svd(&t, 0.0, Some(2)).unwrap();
        assert!(x.inner_ranks().iter().all(|&r| r <= 2));
    }

    #[test]
    fn lrmf_with_svd_matches_tt_svd() {
        let mut rng = Rng::new(14, 0);
        let t = gaussian_tensor(&[4, 3, 5, 2], &mut rng);
        let eps = 0.3 * t.norm();
        let a = tt_svd(&t, eps, None).unwrap();
        let b = tt_lrmf(&t, &SvdFactorizer, eps).unwrap();
        assert_eq!(a.ranks(), b.ranks());
        assert!(rel(&a.full().unwrap(), &b.full().unwrap()) < 1e-12);
    }

    #[test]
    fn lrmf_with_cross_is_exact_on_low_rank() {
        let mut rng = Rng::new(15, 0);
        let t = random_tt(&[4, 5, 4, 3], &[2, 2, 2], &mut rng)
            .full()
            .unwrap();
        let x = tt_lrmf(&t, &CrossFactorizer, 1e-12).unwrap();
        assert!(t.distance(&x.full().unwrap()).unwrap() <= 1e-8);
    }

    #[test]
    fn lrmf_with_randomized_svd_is_deterministic() {
        let mut rng = Rng::new(16, 0);
        let t = gaussian_tensor(&[4, 4, 4], &mut rng);
        let f = RandomizedSvdFactorizer {
            oversample: 2,
            power: 1,
            seed: 9,
        };
        let a = tt_lrmf(&t, &f, 0.5 * t.norm()).unwrap();
        let b = tt_lrmf(&t, &f, 0.5 * t.norm()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lrmf_errors_carry_the_mode() {
        let mut rng = Rng::new(17, 0);
        let t = gaussian_tensor(&[2, 2, 2], &mut rng);
        let failing = |m: &Matrix, _t: RankTarget| -> Result<crate::lrmf::LowRankFactors> {
            if m.nrows() == 4 {
                Err(TensorError::InvalidArgument("boom".into()))
            } else {
                SvdFactorizer.factorize(m, RankTarget::Tolerance(0.0))
            }
        };
        match tt_lrmf(&t, &failing, 0.0) {
            Err(TensorError::Factorization { mode: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tucker2_cascade_on_order_three_uses_one_split() {
        let mut rng = Rng::new(18, 0);
        let t = random_tt(&[4, 3, 5], &[2, 2], &mut rng).full().unwrap();
        let x = tt_via_tucker2(&t, 1e-9).unwrap();
        let direct = tucker2(
            &t.permute(&[0, 2, 1]).unwrap(),
            1e-9,
            &Tucker2Options::default(),
        )
        .unwrap();
        assert_eq!(x.cores()[0].dims()[2], direct.a.ncols());
        assert_eq!(x.cores()[2].dims()[0], direct.b.ncols());
        assert!(t.distance(&x.full().unwrap()).unwrap() <= 1e-9);
    }

    #[test]
    fn tucker2_cascade_recovers_ranks() {
        let mut rng = Rng::new(19, 0);
        let t = random_tt(&[3, 4, 4, 3], &[2, 2, 2], &mut rng)
            .full()
            .unwrap();
        let x = tt_via_tucker2(&t, 1e-9).unwrap();
        assert_eq!(x.inner_ranks(), vec![2, 2, 2]);
        assert!(t.distance(&x.full().unwrap()).unwrap() <= 1e-9);
    }

    #[test]
    fn tucker2_cascade_meets_budget_and_tracks_tt_svd() {
        let mut rng = Rng::new(20, 0);
        for dims in [[3, 3, 4, 3, 3], [4, 3, 3, 4, 3]] {
            let noise = gaussian_tensor(&dims, &mut rng);
            let t = DenseTensor::from_fn(&dims, |i| {
                let s: f64 = i.iter().map(|&v| v as f64).sum();
                (1.0 + s).recip() + 1e-3 * noise.get(i).unwrap()
            })
            .unwrap();
            for rel_eps in [1e-2, 1e-1] {
                let eps = rel_eps * t.norm();
                let x = tt_via_tucker2(&t, eps).unwrap();
                let y = tt_svd(&t, eps, None).unwrap();
                let ex = t.distance(&x.full().unwrap()).unwrap();
                let ey = t.distance(&y.full().unwrap()).unwrap();
                assert!(ex <= eps);
                assert!(ex <= 2.0 * ey, "{ex} vs {ey}");
            }
        }
    }
}
