//! Rank-revealing matrix factorizations.
//!
//! Every left factor (U or Q) is sign-normalized so the largest-magnitude entry
//! of each column is positive; the matching right factor is flipped with it.

use crate::error::{Result, TensorError};
use crate::rng::{gaussian_matrix, Rng};
use crate::tensor::Matrix;
use log::warn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub eps_abs: f64,
    pub max_rank: Option<usize>,
}

impl TruncationSpec {
    pub fn exact() -> Self {
        TruncationSpec {
            eps_abs: 0.0,
            max_rank: None,
        }
    }

    pub fn eps(eps_abs: f64) -> Self {
        TruncationSpec {
            eps_abs,
            max_rank: None,
        }
    }

    pub fn rank(r: usize) -> Self {
        TruncationSpec {
            eps_abs: 0.0,
            max_rank: Some(r),
        }
    }

    pub fn with_max_rank(mut self, r: Option<usize>) -> Self {
        self.max_rank = r;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
    pub tail_energy: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(S)`.
    pub fn us(&self) -> Matrix {
        let mut m = self.u.clone();
        for (k, &s) in self.s.iter().enumerate() {
            m.column_mut(k).scale_mut(s);
        }
        m
    }

    /// `diag(S) V^T`.
    pub fn svt(&self) -> Matrix {
        let mut m = self.v.transpose();
        for (k, &s) in self.s.iter().enumerate() {
            m.row_mut(k).scale_mut(s);
        }
        m
    }

    pub fn reconstruct(&self) -> Matrix {
        self.us() * self.v.transpose()
    }

    fn truncate(&mut self, r: usize) {
        let tail: f64 = self.s[r..].iter().rev().map(|s| s * s).sum();
        self.tail_energy += tail;
        self.s.truncate(r);
        self.u = self.u.columns(0, r).into_owned();
        self.v = self.v.columns(0, r).into_owned();
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite)
    }
}

fn check_nonempty(m: &Matrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(TensorError::InvalidArgument(format!(
            "empty {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Flips column `k` of `left` (and the paired row/column of the partner) so
/// that its largest-magnitude entry is positive. Earlier entries win ties.
fn sign_fix(left: &mut Matrix, mut flip_partner: impl FnMut(usize)) {
    for k in 0..left.ncols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in left.column(k).iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            left.column_mut(k).neg_mut();
            flip_partner(k);
        }
    }
}

/// Thin SVD with descending singular values.
pub fn full_svd(m: &Matrix) -> Result<SvdResult> {
    check_nonempty(m)?;
    check_finite(m)?;
    let (u, sv, v) = if m.nrows() >= m.ncols() {
        jacobi_svd_tall(m)?
    } else {
        let (v, sv, u) = jacobi_svd_tall(&m.transpose())?;
        (u, sv, v)
    };
    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable sort keeps the earlier index first among equal values
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let s: Vec<f64> = order.iter().map(|&k| sv[k]).collect();
    let mut u = Matrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let mut v = Matrix::from_fn(v.nrows(), order.len(), |j, k| v[(j, order[k])]);
    sign_fix(&mut u, |k| v.column_mut(k).neg_mut());
    Ok(SvdResult {
        u,
        s,
        v,
        tail_energy: 0.0,
    })
}

/// One-sided Jacobi SVD of a matrix with `rows >= cols`, applied to the
/// triangular factor of a Householder QR. Singular values come unsorted.
fn jacobi_svd_tall(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    const MAX_SWEEPS: usize = 100;
    let n = m.ncols();
    let (q, mut a) = thin_qr(m);
    let mut v = Matrix::identity(n, n);
    // columns this far below the matrix norm are treated as exact zeros
    let negligible = (1e-3 * f64::EPSILON).powi(2) * a.norm_squared();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for r in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(r).norm_squared();
                let gamma = a.column(p).dot(&a.column(r));
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, r)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, r)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TensorError::Factorization {
            mode: 0,
            reason: "Jacobi SVD did not converge".into(),
        });
    }
    let s: Vec<f64> = a
        .column_iter()
        .map(|c| {
            if c.norm_squared() <= negligible {
                0.0
            } else {
                c.norm()
            }
        })
        .collect();
    let mut ur = Matrix::zeros(n, n);
    let mut missing = Vec::new();
    for (k, &sk) in s.iter().enumerate() {
        if sk > 0.0 {
            ur.set_column(k, &(a.column(k) / sk));
        } else {
            missing.push(k);
        }
    }
    // zero singular values: complete with basis vectors orthogonal to the rest
    let mut filled: Vec<usize> = (0..n).filter(|k| !missing.contains(k)).collect();
    let mut e = 0;
    for k in missing {
        loop {
            let mut x = nalgebra::DVector::<f64>::zeros(n);
            x[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for &j in &filled {
                    let proj = ur.column(j).dot(&x);
                    x -= ur.column(j) * proj;
                }
            }
            let nrm = x.norm();
            if nrm > 0.5 {
                ur.set_column(k, &(x / nrm));
                filled.push(k);
                break;
            }
        }
    }
    Ok((q * ur, s, v))
}

/// Minimal rank `R >= 1` with `sum_{j >= R} s_j^2 <= eps_sq`, then capped.
pub fn select_rank(s: &[f64], eps_sq: f64, max_rank: Option<usize>) -> usize {
    if s.is_empty() {
        return 0;
    }
    let mut r = s.len();
    let mut tail = 0.0;
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next > eps_sq {
            break;
        }
        tail = next;
        r -= 1;
    }
    match max_rank {
        Some(cap) => r.min(cap.max(1)),
        None => r,
    }
}

pub fn truncated_svd(m: &Matrix, spec: TruncationSpec) -> Result<SvdResult> {
    if !(spec.eps_abs >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "negative tolerance {}",
            spec.eps_abs
        )));
    }
    let mut svd = full_svd(m)?;
    let r = select_rank(&svd.s, spec.eps_abs * spec.eps_abs, spec.max_rank);
    svd.truncate(r);
    Ok(svd)
}

/// Randomized SVD with `r_tilde` Gaussian probes and `q` power steps.
pub fn randomized_svd(m: &Matrix, r_tilde: usize, q: usize, seed: u64) -> Result<SvdResult> {
    check_nonempty(m)?;
    check_finite(m)?;
    if r_tilde == 0 || r_tilde > m.nrows().min(m.ncols()) {
        return Err(TensorError::InvalidArgument(format!(
            "r_tilde = {r_tilde} must lie in 1..={}",
            m.nrows().min(m.ncols())
        )));
    }
    let mut rng = Rng::new(seed, 0x5344);
    let omega = gaussian_matrix(m.ncols(), r_tilde, &mut rng);
    let mut y = m * omega;
    for _ in 0..q {
        y = m * (m.transpose() * y);
    }
    let (qm, _) = thin_qr(&y);
    let a = qm.transpose() * m;
    let small = full_svd(&a)?;
    let u = &qm * &small.u;
    let mut out = SvdResult {
        u,
        s: small.s,
        v: small.v,
        tail_energy: 0.0,
    };
    let mut u = out.u.clone();
    sign_fix(&mut u, |k| out.v.column_mut(k).neg_mut());
    out.u = u;
    out.tail_energy = (m - out.reconstruct()).norm_squared();
    Ok(out)
}

/// SVD of the horizontal concatenation `[X_1, X_2, ..]` from the eigenpairs of
/// `sum_q X_q X_q^T`; right vectors are recovered slice by slice.
///
/// Singular values below the Gram noise floor are dropped before inverting.
pub fn gram_svd_tall(slices: &[Matrix]) -> Result<SvdResult> {
    let first = slices
        .first()
        .ok_or_else(|| TensorError::InvalidArgument("no slices given".into()))?;
    let rows = first.nrows();
    if rows == 0 {
        return Err(TensorError::InvalidArgument("slices have no rows".into()));
    }
    let mut gram = Matrix::zeros(rows, rows);
    let mut total = 0.0;
    for (q, x) in slices.iter().enumerate() {
        if x.nrows() != rows {
            return Err(TensorError::DimensionMismatch(format!(
                "slice {q} has {} rows, expected {rows}",
                x.nrows()
            )));
        }
        check_finite(x)?;
        gram += x * x.transpose();
        total += x.norm_squared();
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sigma: Vec<f64> = order
        .iter()
        .map(|&k| eig.eigenvalues[k].max(0.0).sqrt())
        .collect();
    let s1 = sigma[0];
    let floor = s1 * (1e-14f64).max((rows as f64 * f64::EPSILON).sqrt() * 4.0);
    let keep = sigma
        .iter()
        .take_while(|&&s| s > floor && s > 0.0)
        .count()
        .max(1);
    let mut u = Matrix::from_fn(rows, keep, |i, k| eig.eigenvectors[(i, order[k])]);
    sign_fix(&mut u, |_| {});
    let s: Vec<f64> = sigma[..keep].to_vec();
    let total_cols: usize = slices.iter().map(|x| x.ncols()).sum();
    let mut v = Matrix::zeros(total_cols, keep);
    let mut offset = 0;
    for x in slices {
        let mut vq = x.transpose() * &u;
        for (k, &sk) in s.iter().enumerate() {
            let inv = if sk > 0.0 { 1.0 / sk } else { 0.0 };
            vq.column_mut(k).scale_mut(inv);
        }
        v.view_mut((offset, 0), (x.ncols(), keep)).copy_from(&vq);
        offset += x.ncols();
    }
    let retained: f64 = s.iter().map(|x| x * x).sum();
    Ok(SvdResult {
        u,
        s,
        v,
        tail_energy: (total - retained).max(0.0),
    })
}

/// Thin Householder QR: `M = Q R` with `Q` of size `m x min(m, n)`.
pub fn thin_qr(m: &Matrix) -> (Matrix, Matrix) {
    if m.nrows() == 0 || m.ncols() == 0 {
        let k = m.nrows().min(m.ncols());
        return (Matrix::zeros(m.nrows(), k), Matrix::zeros(k, m.ncols()));
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    sign_fix(&mut q, |k| r.row_mut(k).neg_mut());
    (q, r)
}

/// `M = L Q` with orthonormal rows in `Q`.
pub fn thin_lq(m: &Matrix) -> (Matrix, Matrix) {
    let (q, r) = thin_qr(&m.transpose());
    (r.transpose(), q.transpose())
}

/// Moore-Penrose pseudo-inverse; singular values at or below `rcond * s_1` are
/// treated as zero.
pub fn pinv(m: &Matrix, rcond: f64) -> Result<Matrix> {
    let svd = full_svd(m)?;
    let cut = rcond * svd.s.first().copied().unwrap_or(0.0);
    let mut vs = svd.v.clone();
    for (k, &s) in svd.s.iter().enumerate() {
        let inv = if s > cut && s > 0.0 { 1.0 / s } else { 0.0 };
        vs.column_mut(k).scale_mut(inv);
    }
    Ok(vs * svd.u.transpose())
}

/// Ratio of the largest to the smallest of the `min(m, n)` singular values.
pub fn condition_number(m: &Matrix) -> Result<f64> {
    let s = full_svd(m)?.s;
    let last = *s.last().unwrap_or(&0.0);
    Ok(if last > 0.0 {
        s[0] / last
    } else {
        f64::INFINITY
    })
}

/// `max |Q^T Q - I|` over all entries.
pub fn orthonormality_error(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn select_columns(m: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), cols.len(), |i, k| m[(i, cols[k])])
}

pub fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), m.ncols(), |k, j| m[(rows[k], j)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurResult {
    pub c: Matrix,
    pub u: Matrix,
    pub r: Matrix,
    pub residual: f64,
    /// Condition number of the intersection submatrix `W`.
    pub condition: f64,
}

impl CurResult {
    pub fn reconstruct(&self) -> Matrix {
        &self.c * &self.u * &self.r
    }
}

/// Cross approximation `M ~ C U R` with `U = W^+` for the intersection `W`.
pub fn mca_cur(m: &Matrix, cols: &[usize], rows: &[usize]) -> Result<CurResult> {
    if cols.is_empty() || rows.is_empty() {
        return Err(TensorError::InvalidArgument("empty index set".into()));
    }
    if let Some(&j) = cols.iter().find(|&&j| j >= m.ncols()) {
        return Err(TensorError::IndexOutOfRange {
            mode: 1,
            index: j,
            size: m.ncols(),
        });
    }
    if let Some(&i) = rows.iter().find(|&&i| i >= m.nrows()) {
        return Err(TensorError::IndexOutOfRange {
            mode: 0,
            index: i,
            size: m.nrows(),
        });
    }
    let c = select_columns(m, cols);
    let r = select_rows(m, rows);
    let w = select_columns(&r, cols);
    let condition = condition_number(&w)?;
    if condition > 1e12 {
        warn!("cross approximation: intersection matrix condition number {condition:.3e}");
    }
    let u = pinv(&w, 1e-12)?;
    let residual = (m - &c * &u * &r).norm();
    Ok(CurResult {
        c,
        u,
        r,
        residual,
        condition,
    })
}

/// Greedy full-pivot cross selection on the successively deflated residual.
/// Returns `(rows, cols)`.
pub fn greedy_cross_pivots(m: &Matrix, k: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if k > m.nrows().min(m.ncols()) {
        return Err(TensorError::InvalidArgument(format!(
            "k = {k} exceeds min dimension {}",
            m.nrows().min(m.ncols())
        )));
    }
    let mut e = m.clone();
    let mut rows = Vec::with_capacity(k);
    let mut cols = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = (0.0f64, usize::MAX, usize::MAX);
        for i in 0..e.nrows() {
            if rows.contains(&i) {
                continue;
            }
            for j in 0..e.ncols() {
                if cols.contains(&j) {
                    continue;
                }
                if e[(i, j)].abs() > best.0 || best.1 == usize::MAX {
                    best = (e[(i, j)].abs(), i, j);
                }
            }
        }
        let (pivot_abs, i, j) = best;
        rows.push(i);
        cols.push(j);
        if pivot_abs > 0.0 {
            let col = e.column(j).into_owned();
            let row = e.row(i).into_owned();
            e -= col * row / e[(i, j)];
        }
    }
    Ok((rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_keeps_full_rank() {
        let svd = truncated_svd(&Matrix::identity(3, 3), TruncationSpec::exact()).unwrap();
        assert_eq!(svd.s, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let a = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0]);
        let b = Matrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let svd = truncated_svd(&(&a * b.transpose()), TruncationSpec::eps(1e-12)).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.s[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn sign_convention_on_left_factor() {
        let mut rng = Rng::new(3, 0);
        let m = gaussian_matrix(5, 4, &mut rng);
        let svd = full_svd(&m).unwrap();
        for k in 0..svd.rank() {
            let col = svd.u.column(k);
            let big = col
                .iter()
                .cloned()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            assert!(big > 0.0);
        }
        assert!((svd.reconstruct() - m).norm() < 1e-12);
    }

    #[test]
    fn max_rank_caps_after_eps_rule() {
        let mut rng = Rng::new(4, 0);
        let m = gaussian_matrix(6, 6, &mut rng);
        let svd = truncated_svd(&m, TruncationSpec::exact().with_max_rank(Some(2))).unwrap();
        assert_eq!(svd.rank(), 2);
        let full = full_svd(&m).unwrap();
        let tail: f64 = full.s[2..].iter().map(|s| s * s).sum();
        assert!((svd.tail_energy - tail).abs() < 1e-12 * tail);
    }

    #[test]
    fn qr_of_orthonormal_input() {
        let mut rng = Rng::new(5, 0);
        let (q0, _) = thin_qr(&gaussian_matrix(6, 3, &mut rng));
        let (q, r) = thin_qr(&q0);
        assert!((&q * &r - &q0).norm() < 1e-12);
        for i in 0..3 {
            assert!((r[(i, i)].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lq_reconstructs() {
        let mut rng = Rng::new(6, 0);
        let m = gaussian_matrix(3, 6, &mut rng);
        let (l, q) = thin_lq(&m);
        assert!((&l * &q - &m).norm() < 1e-12);
        assert!(orthonormality_error(&q.transpose()) < 1e-12);
    }

    #[test]
    fn greedy_pivots_on_diagonal() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5.0, 3.0, 2.0]));
        let (rows, cols) = greedy_cross_pivots(&m, 2).unwrap();
        assert_eq!(rows, vec![1, 2]);
        assert_eq!(cols, vec![1, 2]);
    }

    #[test]
    fn greedy_pivot_rank_one() {
        let a = Matrix::from_column_slice(3, 1, &[1.0, -4.0, 2.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.5, 1.0]);
        let (rows, cols) = greedy_cross_pivots(&(&a * b.transpose()), 1).unwrap();
        assert_eq!((rows[0], cols[0]), (1, 1));
    }

    #[test]
    fn randomized_svd_is_deterministic() {
        let mut rng = Rng::new(7, 0);
        let m = gaussian_matrix(8, 6, &mut rng);
        let a = randomized_svd(&m, 3, 1, 11).unwrap();
        let b = randomized_svd(&m, 3, 1, 11).unwrap();
        assert_eq!(a, b);
        assert!(randomized_svd(&m, 7, 0, 1).is_err());
    }

    #[test]
    fn gram_svd_rank_deficient() {
        let a = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let x1 = &a * Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let x2 = &a * Matrix::from_row_slice(1, 3, &[0.5, 0.0, -1.0]);
        let svd = gram_svd_tall(&[x1, x2]).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!(svd.v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = Matrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert_eq!(
            truncated_svd(&m, TruncationSpec::exact()),
            Err(TensorError::NonFinite)
        );
    }

    #[test]
    fn constant_matrices_are_rank_one() {
        for (r, c) in [(2, 512), (8, 128), (32, 32), (64, 16), (1, 5), (5, 1)] {
            let m = Matrix::from_element(r, c, 1.0);
            let svd = full_svd(&m).unwrap();
            let exact = ((r * c) as f64).sqrt();
            assert!(
                (svd.s[0] - exact).abs() < 1e-12 * exact,
                "{r}x{c}: {}",
                svd.s[0]
            );
            assert!(svd.s[1..].iter().all(|&s| s < 1e-12 * exact));
            assert!((svd.reconstruct() - &m).norm() < 1e-12 * exact);
            assert!(orthonormality_error(&svd.u) < 1e-12);
            assert!(orthonormality_error(&svd.v) < 1e-12);
        }
    }

    #[test]
    fn jacobi_matches_gram_spectrum() {
        let mut rng = Rng::new(8, 0);
        let m = gaussian_matrix(9, 5, &mut rng);
        let svd = full_svd(&m).unwrap();
        let mut ev: Vec<f64> = (m.transpose() * &m)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|x| x.sqrt())
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in svd.s.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-10 * ev[0]);
        }
    }
}
