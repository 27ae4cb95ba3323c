use super::{core_from, left_unfold, right_unfold, TtTensor};
use crate::error::{Result, TensorError};
use crate::linalg::{thin_lq, thin_qr, truncated_svd, TruncationSpec};

/// Gauge transform making the train `n`-orthogonal: QR sweeps from the left up
/// to `n - 1`, LQ sweeps from the right down to `n + 1`.
pub fn tt_orthogonalize(x: &TtTensor, n: usize) -> Result<TtTensor> {
    let order = x.order();
    if n >= order {
        return Err(TensorError::InvalidMode { mode: n, order });
    }
    let mut cores = x.cores().to_vec();
    for k in 0..n {
        let d = cores[k].dims().to_vec();
        let (q, r) = thin_qr(&left_unfold(&cores[k]));
        cores[k] = core_from(&q, d[0], d[1], q.ncols());
        let nd = cores[k + 1].dims().to_vec();
        let next = r * right_unfold(&cores[k + 1]);
        cores[k + 1] = core_from(&next, next.nrows(), nd[1], nd[2]);
    }
    for k in (n + 1..order).rev() {
        let d = cores[k].dims().to_vec();
        let (l, q) = thin_lq(&right_unfold(&cores[k]));
        cores[k] = core_from(&q, q.nrows(), d[1], d[2]);
        let pd = cores[k - 1].dims().to_vec();
        let prev = left_unfold(&cores[k - 1]) * l;
        cores[k - 1] = core_from(&prev, pd[0], pd[1], prev.ncols());
    }
    Ok(TtTensor::from_parts(cores, Some(n)))
}

/// Frobenius norm via the active core of an orthogonalized copy.
pub fn tt_norm(x: &TtTensor) -> Result<f64> {
    let n = x.ortho_center().unwrap_or(x.order() - 1);
    let y = if x.ortho_center().is_some() {
        x.clone()
    } else {
        tt_orthogonalize(x, n)?
    };
    Ok(y.cores()[n].norm())
}

/// Recompression to relative accuracy `eps_rel`: left-orthogonalize, then a
/// right-to-left sweep of truncated SVDs with `delta = eps_rel / sqrt(N - 1)`.
/// The rank rule applies `delta` first and then `max_rank`. The result is
/// 0-orthogonal.
pub fn tt_round(x: &TtTensor, eps_rel: f64, max_rank: Option<usize>) -> Result<TtTensor> {
    if !(eps_rel >= 0.0) {
        return Err(TensorError::InvalidArgument(format!(
            "tolerance must be nonnegative, got {eps_rel}"
        )));
    }
    let order = x.order();
    let mut cores = tt_orthogonalize(x, order - 1)?.into_cores();
    if order == 1 {
        return Ok(TtTensor::from_parts(cores, Some(0)));
    }
    let delta = eps_rel / ((order - 1) as f64).sqrt();
    for k in (1..order).rev() {
        let d = cores[k].dims().to_vec();
        let m = right_unfold(&cores[k]);
        let budget = delta * m.norm();
        let svd = truncated_svd(&m, TruncationSpec::eps(budget).with_max_rank(max_rank))?;
        let r = svd.rank();
        cores[k] = core_from(&svd.v.transpose(), r, d[1], d[2]);
        let pd = cores[k - 1].dims().to_vec();
        let prev = left_unfold(&cores[k - 1]) * svd.us();
        cores[k - 1] = core_from(&prev, pd[0], pd[1], r);
    }
    Ok(TtTensor::from_parts(cores, Some(0)))
}
