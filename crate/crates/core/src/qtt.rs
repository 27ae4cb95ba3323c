//! Quantization of long modes into many small virtual modes, and QTT
//! compression on top of TT-SVD.

use crate::error::{Result, TensorError};
use crate::tensor::DenseTensor;
use crate::tt::{tt_svd, TtTensor};
use log::warn;

/// Factor sequences for every original mode. With `interleave` the tensor is
/// a matrix whose row and column levels are merged pairwise into modes of
/// size `I_k J_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizationPlan {
    pub original_dims: Vec<usize>,
    pub factors: Vec<Vec<usize>>,
    pub interleave: bool,
}

/// Splits `dim` into `[q; K]` when `dim = q^K`, otherwise into its prime
/// factors in ascending order.
pub fn plan_factorize(dim: usize, q: usize) -> Result<Vec<usize>> {
    if dim == 0 {
        return Err(TensorError::InvalidArgument(
            "cannot quantize a mode of size 0".into(),
        ));
    }
    if q < 2 {
        return Err(TensorError::InvalidArgument(format!(
            "quantization base must be at least 2, got {q}"
        )));
    }
    if dim == 1 {
        return Ok(vec![1]);
    }
    let mut rest = dim;
    let mut levels = 0;
    while rest.is_multiple_of(q) {
        rest /= q;
        levels += 1;
    }
    if rest == 1 {
        return Ok(vec![q; levels]);
    }
    let mut factors = Vec::new();
    let mut rest = dim;
    let mut p = 2;
    while p * p <= rest {
        while rest.is_multiple_of(p) {
            factors.push(p);
            rest /= p;
        }
        p += 1;
    }
    if rest > 1 {
        factors.push(rest);
    }
    if factors.len() == 1 {
        warn!("mode of prime size {dim} cannot be quantized: no quantization gain");
    }
    Ok(factors)
}

impl QuantizationPlan {
    /// Plan for a tensor: each mode factored independently.
    pub fn tensor(dims: &[usize], q: usize) -> Result<Self> {
        let factors = dims
            .iter()
            .map(|&d| plan_factorize(d, q))
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantizationPlan {
            original_dims: dims.to_vec(),
            factors,
            interleave: false,
        })
    }

    /// Plan for a matrix with interleaved levels; the shorter factor list is
    /// padded with trailing 1's so that levels pair up.
    pub fn matrix(rows: usize, cols: usize, q: usize) -> Result<Self> {
        let mut fr = plan_factorize(rows, q)?;
        let mut fc = plan_factorize(cols, q)?;
        let k = fr.len().max(fc.len());
        fr.resize(k, 1);
        fc.resize(k, 1);
        Ok(QuantizationPlan {
            original_dims: vec![rows, cols],
            factors: vec![fr, fc],
            interleave: true,
        })
    }

    /// Mode sizes of the quantized tensor.
    pub fn quantized_dims(&self) -> Vec<usize> {
        if self.interleave {
            self.factors[0]
                .iter()
                .zip(&self.factors[1])
                .map(|(i, j)| i * j)
                .collect()
        } else {
            self.factors.iter().flatten().copied().collect()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.factors.len() != self.original_dims.len() {
            return Err(TensorError::InvalidArgument(
                "one factor list per mode".into(),
            ));
        }
        for (n, (f, &d)) in self.factors.iter().zip(&self.original_dims).enumerate() {
            if f.is_empty() || f.iter().product::<usize>() != d {
                return Err(TensorError::InvalidArgument(format!(
                    "factors {f:?} do not multiply to mode {n} size {d}"
                )));
            }
        }
        if self.interleave
            && (self.original_dims.len() != 2 || self.factors[0].len() != self.factors[1].len())
        {
            return Err(TensorError::InvalidArgument(
                "interleaving needs a matrix with paired levels".into(),
            ));
        }
        Ok(())
    }

    fn check_input(&self, t: &DenseTensor) -> Result<()> {
        self.validate()?;
        if t.dims() != self.original_dims.as_slice() {
            return Err(TensorError::DimensionMismatch(format!(
                "plan is for {:?}, tensor has {:?}",
                self.original_dims,
                t.dims()
            )));
        }
        Ok(())
    }
}

fn level_perm(k: usize) -> Vec<usize> {
    (0..k).flat_map(|l| [l, k + l]).collect()
}

pub fn quantize(t: &DenseTensor, plan: &QuantizationPlan) -> Result<DenseTensor> {
    plan.check_input(t)?;
    if !plan.interleave {
        return t.reshape(&plan.quantized_dims());
    }
    let k = plan.factors[0].len();
    let split: Vec<usize> = plan.factors[0]
        .iter()
        .chain(&plan.factors[1])
        .copied()
        .collect();
    t.reshape(&split)?
        .permute(&level_perm(k))?
        .into_reshape(&plan.quantized_dims())
}

pub fn dequantize(tq: &DenseTensor, plan: &QuantizationPlan) -> Result<DenseTensor> {
    plan.validate()?;
    if tq.dims() != plan.quantized_dims().as_slice() {
        return Err(TensorError::DimensionMismatch(format!(
            "quantized tensor has dims {:?}, plan expects {:?}",
            tq.dims(),
            plan.quantized_dims()
        )));
    }
    if !plan.interleave {
        return tq.reshape(&plan.original_dims);
    }
    let k = plan.factors[0].len();
    let paired: Vec<usize> = (0..k)
        .flat_map(|l| [plan.factors[0][l], plan.factors[1][l]])
        .collect();
    let mut inverse = vec![0; 2 * k];
    for (pos, &src) in level_perm(k).iter().enumerate() {
        inverse[src] = pos;
    }
    tq.reshape(&paired)?
        .permute(&inverse)?
        .into_reshape(&plan.original_dims)
}

/// Quantize, then TT-SVD with absolute budget `eps`.
pub fn qtt_compress(
    t: &DenseTensor,
    plan: &QuantizationPlan,
    eps: f64,
) -> Result<(TtTensor, QuantizationPlan)> {
    let tq = quantize(t, plan)?;
    Ok((tt_svd(&tq, eps, None)?, plan.clone()))
}

pub fn qtt_decompress(x: &TtTensor, plan: &QuantizationPlan) -> Result<DenseTensor> {
    dequantize(&x.full()?, plan)
}
