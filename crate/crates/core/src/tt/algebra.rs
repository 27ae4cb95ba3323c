use super::{check_same_dims, core_from_slices, slice, TtTensor};
use crate::cp::KruskalTensor;
use crate::error::{Result, TensorError};
use crate::ops::{convolve, mode_product, Convolution};
use crate::tensor::{DenseTensor, Matrix};

/// Sum with ranks `R_n + R~_n`: border slices are `[X Y]` and `[X; Y]`, inner
/// slices block-diagonal.
pub fn tt_add(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    check_same_dims(x, y)?;
    let n = x.order();
    if n == 1 {
        return TtTensor::new(vec![x.cores()[0].add(&y.cores()[0])?]);
    }
    let cores = x
        .cores()
        .iter()
        .zip(y.cores())
        .enumerate()
        .map(|(k, (cx, cy))| {
            let (dx, dy) = (cx.dims(), cy.dims());
            let r0 = if k == 0 { 1 } else { dx[0] + dy[0] };
            let r1 = if k == n - 1 { 1 } else { dx[2] + dy[2] };
            let slices: Vec<Matrix> = (0..dx[1])
                .map(|i| {
                    let (sx, sy) = (slice(cx, i), slice(cy, i));
                    let mut s = Matrix::zeros(r0, r1);
                    s.view_mut((0, 0), sx.shape()).copy_from(&sx);
                    let at = (
                        if k == 0 { 0 } else { dx[0] },
                        if k == n - 1 { 0 } else { dx[2] },
                    );
                    s.view_mut(at, sy.shape()).copy_from(&sy);
                    s
                })
                .collect();
            core_from_slices(r0, r1, &slices)
        })
        .collect();
    TtTensor::new(cores)
}

pub fn tt_scale(x: &TtTensor, alpha: f64) -> TtTensor {
    let mut cores = x.cores().to_vec();
    let n = x.ortho_center().unwrap_or(0);
    cores[n] = cores[n].scale(alpha);
    TtTensor::from_parts(cores, x.ortho_center())
}

pub fn tt_sub(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    tt_add(x, &tt_scale(y, -1.0))
}

/// Elementwise product; slices are `X_i (x) Y_i`, ranks `R_n R~_n`.
pub fn tt_hadamard(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    check_same_dims(x, y)?;
    let cores = x
        .cores()
        .iter()
        .zip(y.cores())
        .map(|(cx, cy)| {
            let slices: Vec<Matrix> = (0..cx.dims()[1])
                .map(|i| slice(cx, i).kronecker(&slice(cy, i)))
                .collect();
            core_from_slices(
                cx.dims()[0] * cy.dims()[0],
                cx.dims()[2] * cy.dims()[2],
                &slices,
            )
        })
        .collect();
    TtTensor::new(cores)
}

/// Kronecker product of equal-order trains: mode sizes `I_n J_n` with merged
/// index `i + I_n j`, slices `X_i (x) Y_j`.
pub fn tt_kron(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    if x.order() != y.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "Kronecker product needs equal orders, got {} and {}",
            x.order(),
            y.order()
        )));
    }
    let cores = x
        .cores()
        .iter()
        .zip(y.cores())
        .map(|(cx, cy)| {
            let (ix, iy) = (cx.dims()[1], cy.dims()[1]);
            let slices: Vec<Matrix> = (0..ix * iy)
                .map(|k| slice(cx, k % ix).kronecker(&slice(cy, k / ix)))
                .collect();
            core_from_slices(
                cx.dims()[0] * cy.dims()[0],
                cx.dims()[2] * cy.dims()[2],
                &slices,
            )
        })
        .collect();
    TtTensor::new(cores)
}

/// Outer product: the cores of `y` are appended to those of `x`.
pub fn tt_outer(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    let mut cores = x.cores().to_vec();
    cores.extend_from_slice(y.cores());
    TtTensor::new(cores)
}

/// `X x_n A`, applied to core `n` alone.
pub fn tt_mode_matrix(x: &TtTensor, a: &Matrix, n: usize) -> Result<TtTensor> {
    if n >= x.order() {
        return Err(TensorError::InvalidMode {
            mode: n,
            order: x.order(),
        });
    }
    let mut cores = x.cores().to_vec();
    cores[n] = mode_product(&cores[n], a, 1)?;
    TtTensor::new(cores)
}

/// Applies one linear map per mode.
pub fn tt_modewise_transform(x: &TtTensor, maps: &[Matrix]) -> Result<TtTensor> {
    if maps.len() != x.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "{} maps for {} modes",
            maps.len(),
            x.order()
        )));
    }
    let cores = x
        .cores()
        .iter()
        .zip(maps)
        .map(|(c, a)| mode_product(c, a, 1))
        .collect::<Result<Vec<_>>>()?;
    TtTensor::new(cores)
}

/// Full N-D convolution, core by core along the physical mode; ranks `R_n Q_n`.
pub fn tt_convolve(x: &TtTensor, y: &TtTensor) -> Result<TtTensor> {
    if x.order() != y.order() {
        return Err(TensorError::DimensionMismatch(format!(
            "convolution needs equal orders, got {} and {}",
            x.order(),
            y.order()
        )));
    }
    let cores = x
        .cores()
        .iter()
        .zip(y.cores())
        .map(|(cx, cy)| convolve(cx, cy, Convolution::Partial(1)))
        .collect::<Result<Vec<_>>>()?;
    TtTensor::new(cores)
}

/// `<X, Y>` by the left-to-right recursion `S_n = sum_i X_i^T S_{n-1} Y_i`.
pub fn tt_inner(x: &TtTensor, y: &TtTensor) -> Result<f64> {
    check_same_dims(x, y)?;
    let mut s = Matrix::from_element(1, 1, 1.0);
    for (cx, cy) in x.cores().iter().zip(y.cores()) {
        let mut next = Matrix::zeros(cx.dims()[2], cy.dims()[2]);
        for i in 0..cx.dims()[1] {
            next += slice(cx, i).transpose() * &s * slice(cy, i);
        }
        s = next;
    }
    Ok(s[(0, 0)])
}

/// TT form of a Kruskal tensor: `A^(1) diag(lambda)`, diagonal inner slices,
/// and `A^(N)^T`.
pub fn cp_to_tt(k: &KruskalTensor) -> Result<TtTensor> {
    let n = k.order();
    let r = k.rank();
    if n == 0 || r == 0 {
        return Err(TensorError::InvalidArgument("empty Kruskal tensor".into()));
    }
    if n == 1 {
        let col = &k.factors[0] * Matrix::from_column_slice(r, 1, &k.weights);
        return TtTensor::new(vec![DenseTensor::new(
            vec![1, col.nrows(), 1],
            col.as_slice().to_vec(),
        )?]);
    }
    let cores = k
        .factors
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let slices: Vec<Matrix> = (0..a.nrows())
                .map(|i| {
                    let row: Vec<f64> = (0..r).map(|c| a[(i, c)]).collect();
                    if m == 0 {
                        Matrix::from_fn(1, r, |_, c| row[c] * k.weights[c])
                    } else if m == n - 1 {
                        Matrix::from_column_slice(r, 1, &row)
                    } else {
                        Matrix::from_diagonal(&nalgebra::DVector::from_vec(row))
                    }
                })
                .collect();
            let r0 = if m == 0 { 1 } else { r };
            let r1 = if m == n - 1 { 1 } else { r };
            core_from_slices(r0, r1, &slices)
        })
        .collect();
    TtTensor::new(cores)
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::ops::{hadamard, inner, kron, outer};
    use crate::rng::{gaussian_matrix, Rng};

    #[test]
    fn add_matches_dense() {
        let mut rng = Rng::new(31, 0);
        let x = random_tt(&[2, 3, 4], &[2, 3], &mut rng);
        let y = random_tt(&[2, 3, 4], &[3, 1], &mut rng);
        let z = tt_add(&x, &y).unwrap();
        assert_eq!(z.inner_ranks(), vec![5, 4]);
        assert!(
            rel(
                &z.full().unwrap(),
                &x.full().unwrap().add(&y.full().unwrap()).unwrap()
            ) < 1e-12
        );
    }

    #[test]
    fn hadamard_and_inner_match_dense() {
        let mut rng = Rng::new(32, 0);
        let x = random_tt(&[3, 2, 3], &[2, 3], &mut rng);
        let y = random_tt(&[3, 2, 3], &[3, 2], &mut rng);
        let z = tt_hadamard(&x, &y).unwrap();
        assert_eq!(z.inner_ranks(), vec![6, 6]);
        let (dx, dy) = (x.full().unwrap(), y.full().unwrap());
        assert!(rel(&z.full().unwrap(), &hadamard(&dx, &dy).unwrap()) < 1e-12);
        let ip = tt_inner(&x, &y).unwrap();
        assert!((ip - inner(&dx, &dy).unwrap()).abs() < 1e-12 * dx.norm() * dy.norm());
    }

    #[test]
    fn kron_and_outer_match_dense() {
        let mut rng = Rng::new(33, 0);
        let x = random_tt(&[2, 3], &[2], &mut rng);
        let y = random_tt(&[3, 2], &[3], &mut rng);
        let (dx, dy) = (x.full().unwrap(), y.full().unwrap());
        assert!(
            rel(
                &tt_kron(&x, &y).unwrap().full().unwrap(),
                &kron(&dx, &dy).unwrap()
            ) < 1e-12
        );
        assert!(
            rel(
                &tt_outer(&x, &y).unwrap().full().unwrap(),
                &outer(&dx, &dy).unwrap()
            ) < 1e-12
        );
    }

    #[test]
    fn mode_matrix_and_transform_match_dense() {
        let mut rng = Rng::new(34, 0);
        let x = random_tt(&[2, 3, 4], &[2, 2], &mut rng);
        let a = gaussian_matrix(5, 3, &mut rng);
        let z = tt_mode_matrix(&x, &a, 1).unwrap();
        assert!(
            rel(
                &z.full().unwrap(),
                &mode_product(&x.full().unwrap(), &a, 1).unwrap()
            ) < 1e-12
        );
        let maps: Vec<Matrix> = x
            .dims()
            .iter()
            .map(|&d| gaussian_matrix(2, d, &mut rng))
            .collect();
        let w = tt_modewise_transform(&x, &maps).unwrap();
        let dense = crate::ops::multilinear_product(&x.full().unwrap(), &maps).unwrap();
        assert!(rel(&w.full().unwrap(), &dense) < 1e-12);
    }

    #[test]
    fn convolve_matches_dense() {
        let mut rng = Rng::new(35, 0);
        let x = random_tt(&[3, 2, 3], &[2, 2], &mut rng);
        let y = random_tt(&[2, 3, 2], &[2, 3], &mut rng);
        let z = tt_convolve(&x, &y).unwrap();
        assert_eq!(z.inner_ranks(), vec![4, 6]);
        let dense = convolve(&x.full().unwrap(), &y.full().unwrap(), Convolution::Full).unwrap();
        assert!(rel(&z.full().unwrap(), &dense) < 1e-12);
    }

    #[test]
    fn inner_with_zero_is_zero() {
        let mut rng = Rng::new(36, 0);
        let x = random_tt(&[2, 3], &[2], &mut rng);
        let z = tt_scale(&x, 0.0);
        assert_eq!(tt_inner(&x, &z).unwrap(), 0.0);
    }

    #[test]
    fn cp_conversion() {
        let mut rng = Rng::new(37, 0);
        let factors: Vec<Matrix> = [3, 4, 2, 3]
            .iter()
            .map(|&d| gaussian_matrix(d, 3, &mut rng))
            .collect();
        let k = KruskalTensor::new(vec![1.5, -0.5, 2.0], factors).unwrap();
        let x = cp_to_tt(&k).unwrap();
        assert!(rel(&x.full().unwrap(), &k.full().unwrap()) < 1e-12);
        for c in &x.cores()[1..3] {
            for i in 0..c.dims()[1] {
                let s = slice(c, i);
                assert!((0..3).all(|a| (0..3).all(|b| a == b || s[(a, b)] == 0.0)));
            }
        }
        let one = KruskalTensor::new(
            vec![2.0],
            vec![
                gaussian_matrix(3, 1, &mut rng),
                gaussian_matrix(2, 1, &mut rng),
            ],
        )
        .unwrap();
        assert_eq!(cp_to_tt(&one).unwrap().inner_ranks(), vec![1]);
    }
}
