//! Basic multilinear operations on dense tensors.
//!
//! Merged indices `k = (i, j)` always put the first operand's index fastest
//! (`k = i + I j`) unless stated otherwise.

use crate::error::{Result, TensorError};
use crate::tensor::{next_index, DenseTensor, Matrix, Shape};

fn mismatch(msg: String) -> TensorError {
    TensorError::DimensionMismatch(msg)
}

/// Mode-n product `T x_n B` with `B` of size `J x I_n`.
pub fn mode_product(t: &DenseTensor, b: &Matrix, n: usize) -> Result<DenseTensor> {
    t.check_mode(n)?;
    let dims = t.dims();
    if b.ncols() != dims[n] {
        return Err(mismatch(format!(
            "mode {n} has size {} but the matrix has {} columns",
            dims[n],
            b.ncols()
        )));
    }
    let left: usize = dims[..n].iter().product();
    let right: usize = dims[n + 1..].iter().product();
    let size_n = dims[n];
    let j = b.nrows();
    let bt = b.transpose();
    let mut out = Vec::with_capacity(left * j * right);
    for r in 0..right {
        let slab = &t.data()[r * left * size_n..(r + 1) * left * size_n];
        let m = Matrix::from_column_slice(left, size_n, slab) * &bt;
        out.extend_from_slice(m.as_slice());
    }
    let mut new_dims = dims.to_vec();
    new_dims[n] = j;
    DenseTensor::new(new_dims, out)
}

/// Tensor-times-vector along mode `n`; the mode is removed from the result.
pub fn mode_vector_product(t: &DenseTensor, v: &[f64], n: usize) -> Result<DenseTensor> {
    let row = Matrix::from_row_slice(1, v.len(), v);
    let r = mode_product(t, &row, n)?;
    let mut dims = r.dims().to_vec();
    dims.remove(n);
    r.into_reshape(&dims)
}

/// Applies `(mode, matrix)` products in the given order.
pub fn mode_products(t: &DenseTensor, ops: &[(usize, &Matrix)]) -> Result<DenseTensor> {
    let mut acc = t.clone();
    for &(n, m) in ops {
        acc = mode_product(&acc, m, n)?;
    }
    Ok(acc)
}

/// Tucker product `[[G; B_0, .., B_{N-1}]]`.
pub fn multilinear_product(g: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    if factors.len() != g.order() {
        return Err(mismatch(format!(
            "{} factors for a tensor of order {}",
            factors.len(),
            g.order()
        )));
    }
    let ops: Vec<(usize, &Matrix)> = factors.iter().enumerate().collect();
    mode_products(g, &ops)
}

/// Contracts `modes_a` of `a` against `modes_b` of `b`. Free modes of `a`
/// precede free modes of `b` in the result.
pub fn contract(
    a: &DenseTensor,
    b: &DenseTensor,
    modes_a: &[usize],
    modes_b: &[usize],
) -> Result<DenseTensor> {
    if modes_a.len() != modes_b.len() {
        return Err(mismatch(format!(
            "{} modes paired with {}",
            modes_a.len(),
            modes_b.len()
        )));
    }
    for (&ma, &mb) in modes_a.iter().zip(modes_b) {
        a.check_mode(ma)?;
        b.check_mode(mb)?;
        if a.dims()[ma] != b.dims()[mb] {
            return Err(mismatch(format!(
                "mode {ma} (size {}) paired with mode {mb} (size {})",
                a.dims()[ma],
                b.dims()[mb]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.order()).filter(|m| !modes_a.contains(m)).collect();
    let free_b: Vec<usize> = (0..b.order()).filter(|m| !modes_b.contains(m)).collect();
    let perm_a: Vec<usize> = free_a.iter().chain(modes_a).copied().collect();
    let perm_b: Vec<usize> = modes_b.iter().chain(&free_b).copied().collect();
    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;
    let k: usize = modes_a.iter().map(|&m| a.dims()[m]).product();
    let ra = a.numel() / k;
    let cb = b.numel() / k;
    let ma = Matrix::from_column_slice(ra, k, pa.data());
    let mb = Matrix::from_column_slice(k, cb, pb.data());
    let c = ma * mb;
    let dims: Vec<usize> = free_a
        .iter()
        .map(|&m| a.dims()[m])
        .chain(free_b.iter().map(|&m| b.dims()[m]))
        .collect();
    DenseTensor::new(dims, c.as_slice().to_vec())
}

/// Frobenius inner product of equally shaped tensors.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(mismatch(format!(
            "shapes {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum())
}

pub fn outer(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let mut data = Vec::with_capacity(a.numel() * b.numel());
    for &y in b.data() {
        data.extend(a.data().iter().map(|&x| x * y));
    }
    let dims: Vec<usize> = a.dims().iter().chain(b.dims()).copied().collect();
    DenseTensor::new(dims, data)
}

fn padded(dims: &[usize], order: usize) -> Vec<usize> {
    let mut d = dims.to_vec();
    d.resize(order, 1);
    d
}

/// Left Kronecker product: mode sizes `I_n J_n`, merged index `i_n + I_n j_n`.
pub fn kron(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let order = a.order().max(b.order());
    let da = padded(a.dims(), order);
    let db = padded(b.dims(), order);
    let dims: Vec<usize> = da.iter().zip(&db).map(|(x, y)| x * y).collect();
    let strides = Shape::new(dims.clone())?.strides();
    let off_a = offsets(&da, |n, i| i * strides[n]);
    let off_b = offsets(&db, |n, j| j * da[n] * strides[n]);
    let mut data = vec![0.0; a.numel() * b.numel()];
    for (&y, &ob) in b.data().iter().zip(&off_b) {
        for (&x, &oa) in a.data().iter().zip(&off_a) {
            data[oa + ob] = x * y;
        }
    }
    DenseTensor::new(dims, data)
}

/// Per-element offset `sum_n f(n, i_n)` over a box enumerated little-endian.
fn offsets(dims: &[usize], f: impl Fn(usize, usize) -> usize) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; dims.len()];
    loop {
        out.push(idx.iter().enumerate().map(|(n, &i)| f(n, i)).sum());
        if !next_index(&mut idx, dims) {
            break;
        }
    }
    out
}

/// Left Kronecker product of matrices, `A (x)_L B = B (x) A`.
pub fn kron_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    b.kronecker(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KhatriRao {
    /// Columnwise right Kronecker `a_r (x) b_r`.
    Mode2,
    /// Columnwise left Kronecker `a_r (x)_L b_r`.
    Left,
    /// Rowwise right Kronecker `A(i,:) (x) B(i,:)`.
    Mode1,
}

pub fn khatri_rao(a: &Matrix, b: &Matrix, variant: KhatriRao) -> Result<Matrix> {
    match variant {
        KhatriRao::Mode2 | KhatriRao::Left => {
            if a.ncols() != b.ncols() {
                return Err(mismatch(format!(
                    "column counts {} and {}",
                    a.ncols(),
                    b.ncols()
                )));
            }
            let (ia, ib) = (a.nrows(), b.nrows());
            let mut c = Matrix::zeros(ia * ib, a.ncols());
            for r in 0..a.ncols() {
                for j in 0..ib {
                    for i in 0..ia {
                        let row = if variant == KhatriRao::Mode2 {
                            i * ib + j
                        } else {
                            i + ia * j
                        };
                        c[(row, r)] = a[(i, r)] * b[(j, r)];
                    }
                }
            }
            Ok(c)
        }
        KhatriRao::Mode1 => {
            if a.nrows() != b.nrows() {
                return Err(mismatch(format!(
                    "row counts {} and {}",
                    a.nrows(),
                    b.nrows()
                )));
            }
            let (ra, rb) = (a.ncols(), b.ncols());
            let mut c = Matrix::zeros(a.nrows(), ra * rb);
            for i in 0..a.nrows() {
                for p in 0..ra {
                    for q in 0..rb {
                        c[(i, p * rb + q)] = a[(i, p)] * b[(i, q)];
                    }
                }
            }
            Ok(c)
        }
    }
}

/// Mode-n Khatri-Rao product of tensors: slices along `n` are combined by the
/// right Kronecker product, so `b`'s index is fastest in every merged mode.
pub fn khatri_rao_tensor(a: &DenseTensor, b: &DenseTensor, n: usize) -> Result<DenseTensor> {
    if a.order() != b.order() {
        return Err(mismatch(format!("orders {} and {}", a.order(), b.order())));
    }
    a.check_mode(n)?;
    if a.dims()[n] != b.dims()[n] {
        return Err(mismatch(format!(
            "mode {n} sizes {} and {}",
            a.dims()[n],
            b.dims()[n]
        )));
    }
    let (da, db) = (a.dims(), b.dims());
    let dims: Vec<usize> = (0..a.order())
        .map(|m| if m == n { da[m] } else { da[m] * db[m] })
        .collect();
    let shape = Shape::new(dims.clone())?;
    let mut out = vec![0.0; shape.numel()];
    let mut ia = vec![0; a.order()];
    loop {
        let x = a.get(&ia)?;
        let mut jb = vec![0; b.order()];
        loop {
            if jb[n] == ia[n] {
                let k: Vec<usize> = (0..a.order())
                    .map(|m| if m == n { ia[m] } else { jb[m] + db[m] * ia[m] })
                    .collect();
                let pos = crate::tensor::linear_index(&shape, &k)?;
                out[pos] = x * b.get(&jb)?;
            }
            if !next_index(&mut jb, db) {
                break;
            }
        }
        if !next_index(&mut ia, da) {
            break;
        }
    }
    DenseTensor::new(dims, out)
}

pub fn hadamard(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    a.zip_with(b, |x, y| x * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glue {
    DirectSum,
    /// Direct sum of the slices along the shared mode.
    PartialDirectSum(usize),
    Concat(usize),
}

pub fn glue(a: &DenseTensor, b: &DenseTensor, variant: Glue) -> Result<DenseTensor> {
    let order = match variant {
        Glue::Concat(n) | Glue::PartialDirectSum(n) => a.order().max(b.order()).max(n + 1),
        Glue::DirectSum => a.order().max(b.order()),
    };
    if let Glue::PartialDirectSum(n) = variant {
        if n >= a.order().max(b.order()) {
            return Err(TensorError::InvalidMode {
                mode: n,
                order: a.order().max(b.order()),
            });
        }
        if order < 2 {
            return Err(TensorError::InvalidArgument(
                "partial direct sum needs at least two modes".into(),
            ));
        }
    }
    let da = padded(a.dims(), order);
    let db = padded(b.dims(), order);
    // per-mode offset of b's block and the result size
    let mut dims = Vec::with_capacity(order);
    let mut shift = Vec::with_capacity(order);
    for m in 0..order {
        let summed = match variant {
            Glue::DirectSum => true,
            Glue::PartialDirectSum(n) => m != n,
            Glue::Concat(n) => m == n,
        };
        if summed {
            dims.push(da[m] + db[m]);
            shift.push(da[m]);
        } else {
            if da[m] != db[m] {
                return Err(mismatch(format!(
                    "mode {m} sizes {} and {} must agree",
                    da[m], db[m]
                )));
            }
            dims.push(da[m]);
            shift.push(0);
        }
    }
    let strides = Shape::new(dims.clone())?.strides();
    let mut data = vec![0.0; dims.iter().product()];
    for (&x, o) in a.data().iter().zip(offsets(&da, |n, i| i * strides[n])) {
        data[o] = x;
    }
    for (&y, o) in b
        .data()
        .iter()
        .zip(offsets(&db, |n, j| (j + shift[n]) * strides[n]))
    {
        data[o] = y;
    }
    DenseTensor::new(dims, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convolution {
    /// Full N-D convolution, mode sizes `I_n + J_n - 1`.
    Full,
    /// 1-D convolution along one mode; other modes Kronecker-merged with
    /// `a`'s index fastest.
    Partial(usize),
}

pub fn convolve(a: &DenseTensor, b: &DenseTensor, variant: Convolution) -> Result<DenseTensor> {
    let order = a.order().max(b.order());
    if let Convolution::Partial(n) = variant {
        if n >= order {
            return Err(TensorError::InvalidMode { mode: n, order });
        }
    }
    let da = padded(a.dims(), order);
    let db = padded(b.dims(), order);
    let is_conv = |m: usize| match variant {
        Convolution::Full => true,
        Convolution::Partial(n) => m == n,
    };
    let dims: Vec<usize> = (0..order)
        .map(|m| {
            if is_conv(m) {
                da[m] + db[m] - 1
            } else {
                da[m] * db[m]
            }
        })
        .collect();
    let strides = Shape::new(dims.clone())?.strides();
    let off_a = offsets(&da, |m, i| i * strides[m]);
    let off_b = offsets(&db, |m, j| {
        if is_conv(m) {
            j * strides[m]
        } else {
            j * da[m] * strides[m]
        }
    });
    let mut data = vec![0.0; dims.iter().product()];
    for (&y, &ob) in b.data().iter().zip(&off_b) {
        for (&x, &oa) in a.data().iter().zip(&off_a) {
            data[oa + ob] += x * y;
        }
    }
    DenseTensor::new(dims, data)
}

/// Sums over the diagonals of each mode pair; remaining modes keep their order.
pub fn tensor_trace(a: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut traced = vec![false; a.order()];
    for &(p, q) in pairs {
        a.check_mode(p)?;
        a.check_mode(q)?;
        if p == q || traced[p] || traced[q] {
            return Err(TensorError::InvalidArgument(format!(
                "invalid trace pair ({p}, {q})"
            )));
        }
        if a.dims()[p] != a.dims()[q] {
            return Err(mismatch(format!("trace pair ({p}, {q}) sizes differ")));
        }
        traced[p] = true;
        traced[q] = true;
    }
    let free: Vec<usize> = (0..a.order()).filter(|&m| !traced[m]).collect();
    let out_dims: Vec<usize> = free.iter().map(|&m| a.dims()[m]).collect();
    let out_shape = Shape::new(out_dims.clone())?;
    let out_strides = out_shape.strides();
    let mut data = vec![0.0; out_shape.numel()];
    let mut idx = vec![0; a.order()];
    for &x in a.data() {
        if pairs.iter().all(|&(p, q)| idx[p] == idx[q]) {
            let pos: usize = free
                .iter()
                .zip(&out_strides)
                .map(|(&m, &s)| idx[m] * s)
                .sum();
            data[pos] += x;
        }
        next_index(&mut idx, a.dims());
    }
    DenseTensor::new(out_dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_tensor, Rng};

    fn close(a: &DenseTensor, b: &DenseTensor, tol: f64) {
        assert_eq!(a.dims(), b.dims());
        let scale = b.norm().max(1.0);
        assert!(
            a.distance(b).unwrap() <= tol * scale,
            "{:?} vs {:?}",
            a.data(),
            b.data()
        );
    }

    #[test]
    fn identity_mode_product() {
        let mut rng = Rng::new(1, 0);
        let t = gaussian_tensor(&[2, 3, 4], &mut rng);
        for n in 0..3 {
            let id = Matrix::identity(t.dims()[n], t.dims()[n]);
            assert_eq!(mode_product(&t, &id, n).unwrap(), t);
        }
    }

    #[test]
    fn ones_row_sums_fibers() {
        let mut rng = Rng::new(2, 0);
        let t = gaussian_tensor(&[2, 3, 4], &mut rng);
        let ones = Matrix::from_element(1, 3, 1.0);
        let s = mode_product(&t, &ones, 1).unwrap();
        assert_eq!(s.dims(), &[2, 1, 4]);
        for i in 0..2 {
            for k in 0..4 {
                let oracle: f64 = (0..3).map(|j| t.get(&[i, j, k]).unwrap()).sum();
                assert!((s.get(&[i, 0, k]).unwrap() - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ttv_with_basis_vector_selects_slice() {
        let mut rng = Rng::new(3, 0);
        let t = gaussian_tensor(&[2, 3, 4], &mut rng);
        let s = mode_vector_product(&t, &[0.0, 0.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(s.dims(), &[2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(s.get(&[i, j]).unwrap(), t.get(&[i, j, 2]).unwrap());
            }
        }
    }

    #[test]
    fn order_two_tucker_product() {
        let mut rng = Rng::new(4, 0);
        let g = gaussian_tensor(&[2, 3], &mut rng);
        let a = crate::rng::gaussian_matrix(4, 2, &mut rng);
        let b = crate::rng::gaussian_matrix(5, 3, &mut rng);
        let x = multilinear_product(&g, &[a.clone(), b.clone()]).unwrap();
        let oracle = &a * g.to_matrix().unwrap() * b.transpose();
        close(&x, &DenseTensor::from_matrix(&oracle), 1e-12);
    }

    #[test]
    fn contract_matrices_is_product() {
        let mut rng = Rng::new(5, 0);
        let a = crate::rng::gaussian_matrix(3, 4, &mut rng);
        let b = crate::rng::gaussian_matrix(4, 2, &mut rng);
        let c = contract(
            &DenseTensor::from_matrix(&a),
            &DenseTensor::from_matrix(&b),
            &[1],
            &[0],
        )
        .unwrap();
        close(&c, &DenseTensor::from_matrix(&(a * b)), 1e-12);
    }

    #[test]
    fn full_contraction_is_norm() {
        let mut rng = Rng::new(6, 0);
        let t = gaussian_tensor(&[2, 3, 2], &mut rng);
        let c = contract(&t, &t, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(c.order(), 0);
        assert!((c.data()[0] - t.norm_sq()).abs() < 1e-12 * t.norm_sq());
    }

    #[test]
    fn outer_of_vectors() {
        let a = DenseTensor::from_vector(&[1.0, 2.0]).unwrap();
        let b = DenseTensor::from_vector(&[3.0, 4.0, 5.0]).unwrap();
        let c = outer(&a, &b).unwrap();
        assert_eq!(c.get(&[1, 2]).unwrap(), 10.0);
        assert_eq!(outer(&a, &DenseTensor::scalar(1.0)).unwrap(), a);
        let kl = kron_matrix(
            &Matrix::from_column_slice(2, 1, a.data()),
            &Matrix::from_column_slice(3, 1, b.data()),
        );
        assert_eq!(kl.as_slice(), c.data());
    }

    #[test]
    fn left_kron_matches_right_kron_swapped() {
        let mut rng = Rng::new(7, 0);
        let a = crate::rng::gaussian_matrix(2, 3, &mut rng);
        let b = crate::rng::gaussian_matrix(4, 2, &mut rng);
        let k = kron(&DenseTensor::from_matrix(&a), &DenseTensor::from_matrix(&b)).unwrap();
        assert_eq!(k.to_matrix().unwrap(), b.kronecker(&a));
        let one = DenseTensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert_eq!(
            kron(&DenseTensor::from_matrix(&a), &one).unwrap(),
            DenseTensor::from_matrix(&a)
        );
    }

    #[test]
    fn khatri_rao_shapes() {
        let mut rng = Rng::new(8, 0);
        let a = crate::rng::gaussian_matrix(3, 2, &mut rng);
        let b = crate::rng::gaussian_matrix(4, 2, &mut rng);
        let c = khatri_rao(&a, &b, KhatriRao::Mode2).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (12, 2));
        for r in 0..2 {
            let col = a.column(r).kronecker(&b.column(r));
            assert_eq!(c.column(r), col.column(0));
        }
        let l = khatri_rao(&a, &b, KhatriRao::Left).unwrap();
        for r in 0..2 {
            let col = b.column(r).kronecker(&a.column(r));
            assert_eq!(l.column(r), col.column(0));
        }
        assert!(khatri_rao(
            &a,
            &crate::rng::gaussian_matrix(4, 3, &mut rng),
            KhatriRao::Mode2
        )
        .is_err());
    }

    #[test]
    fn trace_of_matrix() {
        let m = DenseTensor::from_matrix(&Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let t = tensor_trace(&m, &[(0, 1)]).unwrap();
        assert_eq!(t.order(), 0);
        assert_eq!(t.data()[0], 5.0);
    }

    #[test]
    fn direct_sum_of_scalars() {
        let a = DenseTensor::new(vec![1, 1], vec![2.0]).unwrap();
        let b = DenseTensor::new(vec![1, 1], vec![3.0]).unwrap();
        let c = glue(&a, &b, Glue::DirectSum).unwrap();
        assert_eq!(
            c.to_matrix().unwrap(),
            Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])
        );
    }

    #[test]
    fn concat_matrices_stacks_columns() {
        let a = Matrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let b = Matrix::from_row_slice(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let c = glue(
            &DenseTensor::from_matrix(&a),
            &DenseTensor::from_matrix(&b),
            Glue::Concat(1),
        )
        .unwrap();
        assert_eq!(
            c.to_matrix().unwrap(),
            Matrix::from_row_slice(2, 3, &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0])
        );
    }

    #[test]
    fn convolution_with_delta() {
        let mut rng = Rng::new(9, 0);
        let a = gaussian_tensor(&[2, 3], &mut rng);
        let delta = DenseTensor::new(vec![2, 1], vec![0.0, 1.0]).unwrap();
        let c = convolve(&a, &delta, Convolution::Full).unwrap();
        assert_eq!(c.dims(), &[3, 3]);
        for j in 0..3 {
            assert_eq!(c.get(&[0, j]).unwrap(), 0.0);
            for i in 0..2 {
                assert_eq!(c.get(&[i + 1, j]).unwrap(), a.get(&[i, j]).unwrap());
            }
        }
    }

    #[test]
    fn one_dimensional_convolution_is_polynomial_product() {
        // (1 + 2x)(3 + x + x^2) = 3 + 7x + 3x^2 + 2x^3
        let a = DenseTensor::from_vector(&[1.0, 2.0]).unwrap();
        let b = DenseTensor::from_vector(&[3.0, 1.0, 1.0]).unwrap();
        let c = convolve(&a, &b, Convolution::Full).unwrap();
        assert_eq!(c.data(), &[3.0, 7.0, 3.0, 2.0]);
    }
}
