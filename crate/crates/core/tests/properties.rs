//! Property tests over randomly shaped inputs.

use proptest::prelude::*;
use tnet_core::block::{strong_kron, BlockMatrix};
use tnet_core::linalg::{orthonormality_error, select_rank, truncated_svd, TruncationSpec};
use tnet_core::ops::{contract, hadamard, kron, mode_product, outer};
use tnet_core::qtt::{dequantize, quantize, QuantizationPlan};
use tnet_core::rng::{gaussian_matrix, gaussian_tensor, Rng};
use tnet_core::sketch::{draw_test_matrix, sketch, sketch_reconstruct, sketch_specs, Distribution};
use tnet_core::tensor::{linear_index, multi_index, next_index, Shape};
use tnet_core::tt::{tt_add, tt_orthogonalize, tt_round, tt_svd, TtTensor};
use tnet_core::tucker::{
    hooi, sthosvd, tucker_add, tucker_convolve, tucker_hadamard, tucker_inner, tucker_kron, HooiOptions, TuckerTensor,
};
use tnet_core::{DenseTensor, Matrix};

fn rel(got: &DenseTensor, want: &DenseTensor) -> f64 {
    assert_eq!(got.dims(), want.dims());
    got.distance(want).unwrap() / want.norm().max(f64::MIN_POSITIVE)
}

fn random_tt(dims: &[usize], cap: usize, rng: &mut Rng) -> TtTensor {
    let mut r = vec![1];
    for k in 1..dims.len() {
        let left: usize = dims[..k].iter().product();
        let right: usize = dims[k..].iter().product();
        r.push(1 + rng.below(cap.min(left).min(right)));
    }
    r.push(1);
    let cores = dims.iter().enumerate().map(|(k, &d)| gaussian_tensor(&[r[k], d, r[k + 1]], rng)).collect();
    TtTensor::new(cores).unwrap()
}

fn random_tucker(dims: &[usize], rng: &mut Rng) -> TuckerTensor {
    let ranks: Vec<usize> = dims.iter().map(|&d| 1 + rng.below(d)).collect();
    let core = gaussian_tensor(&ranks, rng);
    let factors = dims.iter().zip(&ranks).map(|(&d, &r)| gaussian_matrix(d, r, rng)).collect();
    TuckerTensor::new(core, factors).unwrap()
}

fn dims_strategy(orders: std::ops::RangeInclusive<usize>, max: usize) -> impl Strategy<Value = Vec<usize>> {
    orders.prop_flat_map(move |n| prop::collection::vec(1..=max, n))
}

/// Largest inner product between distinct mode-`n` slices, relative to `||G||^2`.
fn slice_coupling(g: &DenseTensor, n: usize) -> f64 {
    let m = g.matricize_mode(n).unwrap();
    let gram = &m * m.transpose();
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            if i != j {
                worst = worst.max(gram[(i, j)].abs());
            }
        }
    }
    worst / g.norm_sq().max(f64::MIN_POSITIVE)
}

fn each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0; dims.len()];
    loop {
        f(&idx);
        if !next_index(&mut idx, dims) {
            return;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_index_is_a_bijection(dims in dims_strategy(0..=5, 4)) {
        let shape = Shape::new(dims.clone()).unwrap();
        let mut seen = vec![false; shape.numel()];
        each_index(&dims, |idx| {
            let k = linear_index(&shape, idx).unwrap();
            assert!(!seen[k]);
            seen[k] = true;
            assert_eq!(multi_index(&shape, k), idx);
        });
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn unfold_then_fold_is_identity(dims in dims_strategy(1..=6, 4), seed: u64) {
        let mut rng = Rng::new(seed, 0);
        let t = gaussian_tensor(&dims, &mut rng);
        for n in 0..dims.len() {
            let back = DenseTensor::fold_mode(&t.matricize_mode(n).unwrap(), n, &dims).unwrap();
            prop_assert_eq!(&back, &t);
        }
    }

    #[test]
    fn outer_of_vectors_is_left_kron(a in 1usize..6, b in 1usize..6, seed: u64) {
        let mut rng = Rng::new(seed, 1);
        let x = gaussian_tensor(&[a], &mut rng);
        let y = gaussian_tensor(&[b], &mut rng);
        let o = outer(&x, &y).unwrap();
        let k = kron(&x.reshape(&[a, 1]).unwrap(), &y.reshape(&[1, b]).unwrap()).unwrap();
        for i in 0..a {
            for j in 0..b {
                prop_assert_eq!(o.data()[i + a * j], x.data()[i] * y.data()[j]);
            }
        }
        prop_assert_eq!(o.data(), k.data());
    }

    #[test]
    fn mode_products_commute(dims in dims_strategy(2..=4, 4), j1 in 1usize..4, j2 in 1usize..4, seed: u64) {
        let mut rng = Rng::new(seed, 2);
        let t = gaussian_tensor(&dims, &mut rng);
        let a = gaussian_matrix(j1, dims[0], &mut rng);
        let b = gaussian_matrix(j2, dims[1], &mut rng);
        let ab = mode_product(&mode_product(&t, &a, 0).unwrap(), &b, 1).unwrap();
        let ba = mode_product(&mode_product(&t, &b, 1).unwrap(), &a, 0).unwrap();
        prop_assert!(rel(&ab, &ba) <= 1e-12);
    }

    #[test]
    fn full_contraction_sums_the_hadamard_product(dims in dims_strategy(1..=4, 4), seed: u64) {
        let mut rng = Rng::new(seed, 3);
        let a = gaussian_tensor(&dims, &mut rng);
        let b = gaussian_tensor(&dims, &mut rng);
        let modes: Vec<usize> = (0..dims.len()).collect();
        let c = contract(&a, &b, &modes, &modes).unwrap();
        let h: f64 = hadamard(&a, &b).unwrap().data().iter().sum();
        prop_assert_eq!(c.numel(), 1);
        prop_assert!((c.data()[0] - h).abs() <= 1e-12 * a.norm() * b.norm());
    }

    #[test]
    fn strong_kron_of_cores_densifies_the_train(dims in dims_strategy(1..=5, 3), seed: u64) {
        let mut rng = Rng::new(seed, 4);
        let x = random_tt(&dims, 3, &mut rng);
        let as_blocks = |c: &DenseTensor| {
            let d = c.dims();
            BlockMatrix::from_fn((d[0], d[2]), |a, b| {
                Matrix::from_fn(d[1], 1, |i, _| c.data()[a + d[0] * (i + d[1] * b)])
            })
            .unwrap()
        };
        let mut acc = as_blocks(&x.cores()[0]);
        for c in &x.cores()[1..] {
            acc = strong_kron(&acc, &as_blocks(c)).unwrap();
        }
        let v = DenseTensor::new(dims.clone(), acc.block(0, 0).as_slice().to_vec()).unwrap();
        prop_assert!(rel(&v, &x.full().unwrap()) <= 1e-12);
    }

    #[test]
    fn truncated_svd_energy_splits(r in 1usize..9, c in 1usize..9, k in 1usize..9, seed: u64) {
        let mut rng = Rng::new(seed, 5);
        let m = gaussian_matrix(r, c, &mut rng);
        let svd = truncated_svd(&m, TruncationSpec::rank(k)).unwrap();
        let kept: f64 = svd.s.iter().map(|s| s * s).sum();
        prop_assert!((kept + svd.tail_energy - m.norm_squared()).abs() <= 1e-10 * m.norm_squared());
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        let resid = (&m - svd.reconstruct()).norm_squared();
        prop_assert!((resid - svd.tail_energy).abs() <= 1e-10 * m.norm_squared());
        prop_assert!(orthonormality_error(&svd.u) <= 1e-12);
        prop_assert!(orthonormality_error(&svd.v) <= 1e-12);
    }

    #[test]
    fn rank_rule_is_minimal(s in prop::collection::vec(0.0f64..10.0, 1..12), frac in 0.0f64..1.0) {
        let mut s = s;
        s.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = s.iter().map(|x| x * x).sum();
        let eps_sq = frac * total;
        let r = select_rank(&s, eps_sq, None);
        let kept: f64 = s[..r].iter().map(|x| x * x).sum();
        prop_assert!(kept >= total - eps_sq - 1e-12 * total);
        if r > 0 {
            prop_assert!(kept - s[r - 1] * s[r - 1] < total - eps_sq);
        }
    }

    #[test]
    fn tt_svd_meets_absolute_budget(dims in dims_strategy(2..=5, 4), frac in 0.0f64..0.5, seed: u64) {
        let mut rng = Rng::new(seed, 6);
        let t = gaussian_tensor(&dims, &mut rng);
        let eps = frac * t.norm();
        let x = tt_svd(&t, eps, None).unwrap();
        prop_assert!(t.distance(&x.full().unwrap()).unwrap() <= eps + 1e-12 * t.norm());
    }

    #[test]
    fn rounding_contract(dims in dims_strategy(2..=5, 4), eps in 0.0f64..0.5, seed: u64) {
        let mut rng = Rng::new(seed, 7);
        let x = random_tt(&dims, 3, &mut rng);
        let y = tt_round(&x, eps, None).unwrap();
        let (dx, dy) = (x.full().unwrap(), y.full().unwrap());
        prop_assert!(dx.distance(&dy).unwrap() <= eps * dx.norm() + 1e-12 * dx.norm());
        prop_assert!(y.ranks().iter().zip(x.ranks()).all(|(a, b)| *a <= b));
    }

    #[test]
    fn orthogonalization_is_a_gauge(dims in dims_strategy(1..=5, 4), seed: u64) {
        let mut rng = Rng::new(seed, 8);
        let x = random_tt(&dims, 3, &mut rng);
        let dense = x.full().unwrap();
        for n in 0..dims.len() {
            let y = tt_orthogonalize(&x, n).unwrap();
            prop_assert_eq!(y.ortho_center(), Some(n));
            prop_assert!(rel(&y.full().unwrap(), &dense) <= 1e-12);
            prop_assert!((y.cores()[n].norm() - dense.norm()).abs() <= 1e-12 * dense.norm());
        }
    }

    #[test]
    fn tt_add_concatenates_ranks(dims in dims_strategy(1..=5, 4), seed: u64) {
        let mut rng = Rng::new(seed, 9);
        let x = random_tt(&dims, 3, &mut rng);
        let y = random_tt(&dims, 3, &mut rng);
        let z = tt_add(&x, &y).unwrap();
        let want: Vec<usize> = x.inner_ranks().iter().zip(y.inner_ranks()).map(|(a, b)| a + b).collect();
        prop_assert_eq!(z.inner_ranks(), want);
        let sum = x.full().unwrap().add(&y.full().unwrap()).unwrap();
        prop_assert!(rel(&z.full().unwrap(), &sum) <= 1e-12);
    }

    #[test]
    fn tensor_quantization_keeps_the_norm_bit_exactly(dims in dims_strategy(1..=3, 16), q in 2usize..4, seed: u64) {
        let mut rng = Rng::new(seed, 10);
        let t = gaussian_tensor(&dims, &mut rng);
        let plan = QuantizationPlan::tensor(&dims, q).unwrap();
        let tq = quantize(&t, &plan).unwrap();
        prop_assert_eq!(tq.norm().to_bits(), t.norm().to_bits());
        prop_assert_eq!(&dequantize(&tq, &plan).unwrap(), &t);
        for f in &plan.factors {
            prop_assert!(f.len() == 1 || f.iter().all(|&x| x >= 2));
        }
    }

    #[test]
    fn matrix_quantization_permutes_entries(r in 1usize..20, c in 1usize..20, q in 2usize..4, seed: u64) {
        let mut rng = Rng::new(seed, 11);
        let t = gaussian_tensor(&[r, c], &mut rng);
        let plan = QuantizationPlan::matrix(r, c, q).unwrap();
        let tq = quantize(&t, &plan).unwrap();
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(|a, b| a.total_cmp(b));
            v
        };
        prop_assert_eq!(sorted(tq.data()), sorted(t.data()));
        prop_assert_eq!(&dequantize(&tq, &plan).unwrap(), &t);
    }

    #[test]
    fn sthosvd_meets_budget_with_orthonormal_factors(dims in dims_strategy(3..=4, 5), frac in 0.0f64..0.4, seed: u64) {
        let mut rng = Rng::new(seed, 12);
        let t = gaussian_tensor(&dims, &mut rng);
        let eps = frac * t.norm();
        let x = sthosvd(&t, eps).unwrap();
        prop_assert!(t.distance(&x.full().unwrap()).unwrap() <= eps + 1e-12 * t.norm());
        for f in &x.factors {
            prop_assert!(orthonormality_error(f) <= 1e-12);
        }
        let last = dims.len() - 1;
        prop_assert!(slice_coupling(&x.core, last) <= 1e-8);
    }

    #[test]
    fn untruncated_core_is_all_orthogonal(dims in dims_strategy(2..=4, 4), seed: u64) {
        let mut rng = Rng::new(seed, 17);
        let t = gaussian_tensor(&dims, &mut rng);
        let x = sthosvd(&t, 0.0).unwrap();
        prop_assert!(rel(&x.full().unwrap(), &t) <= 1e-12);
        for n in 0..dims.len() {
            prop_assert!(slice_coupling(&x.core, n) <= 1e-8);
        }
    }

    #[test]
    fn hooi_cost_never_increases(seed: u64) {
        let mut rng = Rng::new(seed, 13);
        let t = gaussian_tensor(&[5, 4, 5], &mut rng);
        let ranks = [1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4)];
        let r = hooi(&t, &ranks, &HooiOptions { max_iters: 30, tol: 0.0 }).unwrap();
        prop_assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn tucker_algebra_matches_dense(dims in dims_strategy(3..=4, 3), seed: u64) {
        let mut rng = Rng::new(seed, 14);
        let x = random_tucker(&dims, &mut rng);
        let y = random_tucker(&dims, &mut rng);
        let (dx, dy) = (x.full().unwrap(), y.full().unwrap());
        prop_assert!(rel(&tucker_add(&x, &y).unwrap().full().unwrap(), &dx.add(&dy).unwrap()) <= 1e-10);
        prop_assert!(rel(&tucker_hadamard(&x, &y).unwrap().full().unwrap(), &hadamard(&dx, &dy).unwrap()) <= 1e-10);
        prop_assert!(rel(&tucker_kron(&x, &y).unwrap().full().unwrap(), &kron(&dx, &dy).unwrap()) <= 1e-10);
        let conv = tnet_core::ops::convolve(&dx, &dy, tnet_core::ops::Convolution::Full).unwrap();
        prop_assert!(rel(&tucker_convolve(&x, &y).unwrap().full().unwrap(), &conv) <= 1e-10);
        let ip: f64 = hadamard(&dx, &dy).unwrap().data().iter().sum();
        prop_assert!((tucker_inner(&x, &y).unwrap() - ip).abs() <= 1e-10 * dx.norm() * dy.norm());
    }

    #[test]
    fn sketches_match_mode_product_chains(dims in dims_strategy(2..=4, 5), seed: u64) {
        let mut rng = Rng::new(seed, 15);
        let t = gaussian_tensor(&dims, &mut rng);
        let ranks: Vec<usize> = dims.iter().map(|&d| 1 + rng.below(d)).collect();
        let specs = sketch_specs(&dims, &ranks, Distribution::Gaussian, 1, seed);
        let omegas: Vec<Matrix> = specs.iter().map(|s| draw_test_matrix(s).unwrap()).collect();
        let s = sketch(&t, &specs).unwrap();
        let chain = |skip: Option<usize>| {
            let mut z = t.clone();
            for (n, o) in omegas.iter().enumerate() {
                if Some(n) != skip {
                    z = mode_product(&z, o, n).unwrap();
                }
            }
            z
        };
        prop_assert!(rel(&s.z, &chain(None)) <= 1e-12);
        for n in 0..dims.len() {
            prop_assert!(rel(&s.z_n[n], &chain(Some(n))) <= 1e-12);
        }
    }

    #[test]
    fn full_size_sketch_is_lossless(dims in dims_strategy(2..=3, 4), seed: u64) {
        let mut rng = Rng::new(seed, 16);
        let t = gaussian_tensor(&dims, &mut rng);
        let specs = sketch_specs(&dims, &dims, Distribution::Orthonormal, 0, seed);
        let rec = sketch_reconstruct(&sketch(&t, &specs).unwrap()).unwrap();
        prop_assert!(rel(&rec.tucker.full().unwrap(), &t) <= 1e-8);
    }
}
