//! On-disk layouts.
//!
//! Dense files (`.dt`): magic `DTEN`, `u32` version, `u32` order, one `u64`
//! per mode size, then the entries as little-endian `f64` in little-endian
//! multi-index order. All header integers are little-endian.
//!
//! Network containers (`.tnz`): magic `TNET`, `u32` version, `u32` format tag,
//! the original shape (`u32` count and `u64` sizes), the recorded relative
//! eps (`f64`), an optional quantization plan, and finally a `u32` record
//! count followed by records laid out like a dense file body (order, sizes,
//! payload).
//!
//! | tag | records |
//! |-----|---------|
//! | CP | weights `(R)`, then one `I_n x R` factor per mode |
//! | TUCKER | core, then one `I_n x R_n` factor per mode |
//! | TT | cores `R_{n-1} x I_n x R_n` |
//! | MPO | cores `R_{n-1} x I_n x J_n x R_n` |
//! | TC | cores `R_{n-1} x I_n x R_n` with `R_N = R_0` |

use std::fs;
use std::path::Path;

use thiserror::Error;
use tnet_core::cp::KruskalTensor;
use tnet_core::qtt::{dequantize, QuantizationPlan};
use tnet_core::tt::{TcTensor, TtMatrix, TtTensor};
use tnet_core::tucker::TuckerTensor;
use tnet_core::{DenseTensor, Matrix, TensorError};

pub const DT_MAGIC: [u8; 4] = *b"DTEN";
pub const TNZ_MAGIC: [u8; 4] = *b"TNET";
pub const DT_VERSION: u32 = 1;
pub const TNZ_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {0}")]
    Version(u32),

    #[error("truncated payload: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("element count overflow in a header of sizes {0:?}")]
    CountOverflow(Vec<u64>),

    #[error("unknown network tag {0}")]
    UnknownTag(u32),

    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),

    #[error("malformed container: {0}")]
    Malformed(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl FormatError {
    /// Stable numeric code, distinct per variant.
    pub fn code(&self) -> u32 {
        match self {
            FormatError::Io(_) => 10,
            FormatError::BadMagic { .. } => 11,
            FormatError::Version(_) => 12,
            FormatError::Truncated { .. } => 13,
            FormatError::CountOverflow(_) => 14,
            FormatError::UnknownTag(_) => 15,
            FormatError::TrailingBytes(_) => 16,
            FormatError::Malformed(_) => 17,
            FormatError::Tensor(TensorError::RankChain(_)) => 18,
            FormatError::Tensor(_) => 19,
        }
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> FormatResult<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> FormatResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> FormatResult<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> FormatResult<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> FormatResult<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn magic(&mut self, expected: [u8; 4]) -> FormatResult<()> {
        let avail = (self.bytes.len() - self.pos).min(4);
        let found = &self.bytes[self.pos..self.pos + avail];
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(&expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        self.pos += 4;
        Ok(())
    }

    fn version(&mut self, supported: u32) -> FormatResult<()> {
        match self.u32()? {
            v if v == supported => Ok(()),
            v => Err(FormatError::Version(v)),
        }
    }

    fn sizes(&mut self) -> FormatResult<Vec<u64>> {
        let n = self.u32()? as usize;
        // every size takes 8 bytes, so a count beyond the input is truncation
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n.saturating_mul(8),
                available: self.bytes.len() - self.pos,
            });
        }
        (0..n).map(|_| self.u64()).collect()
    }

    fn dims(&mut self) -> FormatResult<Vec<usize>> {
        let raw = self.sizes()?;
        checked_dims(&raw)
    }

    /// Order, sizes and payload of one dense block.
    fn tensor(&mut self) -> FormatResult<DenseTensor> {
        let raw = self.sizes()?;
        let dims = checked_dims(&raw)?;
        let numel = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let bytes = numel
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| FormatError::CountOverflow(raw.clone()))?;
        let payload = self.take(bytes)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(DenseTensor::new(dims, data)?)
    }

    fn finish(&self) -> FormatResult<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

fn checked_dims(raw: &[u64]) -> FormatResult<Vec<usize>> {
    raw.iter()
        .map(|&d| usize::try_from(d).map_err(|_| FormatError::CountOverflow(raw.to_vec())))
        .collect()
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_len(out: &mut Vec<u8>, n: usize) {
    put_u32(out, u32::try_from(n).expect("count fits in u32"));
}

fn put_sizes(out: &mut Vec<u8>, dims: &[usize]) {
    put_len(out, dims.len());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
}

fn put_tensor(out: &mut Vec<u8>, t: &DenseTensor) {
    put_sizes(out, t.dims());
    out.reserve(8 * t.numel());
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn dense_to_bytes(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * t.order() + 8 * t.numel());
    out.extend_from_slice(&DT_MAGIC);
    put_u32(&mut out, DT_VERSION);
    put_tensor(&mut out, t);
    out
}

pub fn dense_from_bytes(bytes: &[u8]) -> FormatResult<DenseTensor> {
    let mut r = Reader::new(bytes);
    r.magic(DT_MAGIC)?;
    r.version(DT_VERSION)?;
    let t = r.tensor()?;
    r.finish()?;
    Ok(t)
}

pub fn read_dense(path: &Path) -> FormatResult<DenseTensor> {
    dense_from_bytes(&fs::read(path)?)
}

pub fn write_dense(path: &Path, t: &DenseTensor) -> FormatResult<()> {
    Ok(fs::write(path, dense_to_bytes(t))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Cp = 1,
    Tucker = 2,
    Tt = 3,
    Mpo = 4,
    Tc = 5,
}

impl Tag {
    fn from_u32(v: u32) -> FormatResult<Tag> {
        Ok(match v {
            1 => Tag::Cp,
            2 => Tag::Tucker,
            3 => Tag::Tt,
            4 => Tag::Mpo,
            5 => Tag::Tc,
            other => return Err(FormatError::UnknownTag(other)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::Cp => "CP",
            Tag::Tucker => "TUCKER",
            Tag::Tt => "TT",
            Tag::Mpo => "MPO",
            Tag::Tc => "TC",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Cp(KruskalTensor),
    Tucker(TuckerTensor),
    Tt(TtTensor),
    Mpo(TtMatrix),
    Tc(TcTensor),
}

impl Network {
    pub fn tag(&self) -> Tag {
        match self {
            Network::Cp(_) => Tag::Cp,
            Network::Tucker(_) => Tag::Tucker,
            Network::Tt(_) => Tag::Tt,
            Network::Mpo(_) => Tag::Mpo,
            Network::Tc(_) => Tag::Tc,
        }
    }

    /// Stored parameters; for TT-like formats this is `sum R_{n-1} I_n R_n`.
    pub fn param_count(&self) -> usize {
        match self {
            Network::Cp(k) => k.weights.len() + k.factors.iter().map(|f| f.len()).sum::<usize>(),
            Network::Tucker(t) => t.param_count(),
            Network::Tt(x) => x.param_count(),
            Network::Mpo(a) => a.param_count(),
            Network::Tc(c) => c.param_count(),
        }
    }

    /// CP: `[R]`; Tucker: core sizes; trains and chains: `R_0, .., R_N`.
    pub fn ranks(&self) -> Vec<usize> {
        match self {
            Network::Cp(k) => vec![k.rank()],
            Network::Tucker(t) => t.ranks(),
            Network::Tt(x) => x.ranks(),
            Network::Mpo(a) => a.ranks(),
            Network::Tc(c) => c.ranks(),
        }
    }

    /// Mode sizes of the network itself (row sizes for an MPO).
    pub fn dims(&self) -> Vec<usize> {
        match self {
            Network::Cp(k) => k.dims(),
            Network::Tucker(t) => t.dims(),
            Network::Tt(x) => x.dims(),
            Network::Mpo(a) => a.row_dims(),
            Network::Tc(c) => c.dims(),
        }
    }

    fn numel(&self) -> usize {
        let base: usize = self.dims().iter().product();
        match self {
            Network::Mpo(a) => base * a.col_dims().iter().product::<usize>(),
            _ => base,
        }
    }

    fn records(&self) -> Vec<DenseTensor> {
        fn matrix(m: &Matrix) -> DenseTensor {
            DenseTensor::from_matrix(m)
        }
        match self {
            Network::Cp(k) => {
                let mut out = vec![DenseTensor::from_vector(&k.weights).expect("rank >= 1")];
                out.extend(k.factors.iter().map(matrix));
                out
            }
            Network::Tucker(t) => {
                let mut out = vec![t.core.clone()];
                out.extend(t.factors.iter().map(matrix));
                out
            }
            Network::Tt(x) => x.cores().to_vec(),
            Network::Mpo(a) => a.cores().to_vec(),
            Network::Tc(c) => c.cores().to_vec(),
        }
    }

    fn from_records(tag: Tag, mut records: Vec<DenseTensor>) -> FormatResult<Network> {
        fn matrices(records: Vec<DenseTensor>) -> FormatResult<Vec<Matrix>> {
            records
                .into_iter()
                .enumerate()
                .map(|(k, t)| {
                    t.to_matrix()
                        .map_err(|_| FormatError::Malformed(format!("factor {k} is not a matrix")))
                })
                .collect()
        }
        if records.is_empty() {
            return Err(FormatError::Malformed("container holds no records".into()));
        }
        Ok(match tag {
            Tag::Cp => {
                let weights = records.remove(0);
                if weights.order() != 1 {
                    return Err(FormatError::Malformed("CP weights must be a vector".into()));
                }
                Network::Cp(KruskalTensor::new(weights.into_data(), matrices(records)?)?)
            }
            Tag::Tucker => {
                let core = records.remove(0);
                Network::Tucker(TuckerTensor::new(core, matrices(records)?)?)
            }
            Tag::Tt => Network::Tt(TtTensor::new(records)?),
            Tag::Mpo => Network::Mpo(TtMatrix::new(records)?),
            Tag::Tc => Network::Tc(TcTensor::new(records)?),
        })
    }

    /// Dense tensor in the network's own mode sizes; an MPO densifies to its
    /// `rows x cols` matrix.
    pub fn full(&self) -> tnet_core::Result<DenseTensor> {
        match self {
            Network::Cp(k) => k.full(),
            Network::Tucker(t) => t.full(),
            Network::Tt(x) => x.full(),
            Network::Mpo(a) => Ok(DenseTensor::from_matrix(&a.full_matrix()?)),
            Network::Tc(c) => c.full(),
        }
    }
}

/// A network plus the metadata needed to map it back to the original data.
#[derive(Debug, Clone, PartialEq)]
pub struct TnzFile {
    pub network: Network,
    /// Shape of the data the network approximates.
    pub shape: Vec<usize>,
    pub plan: Option<QuantizationPlan>,
    /// Relative accuracy the network was built to.
    pub eps: f64,
}

impl TnzFile {
    /// Checks that the shape, plan and network sizes agree.
    pub fn new(
        network: Network,
        shape: Vec<usize>,
        plan: Option<QuantizationPlan>,
        eps: f64,
    ) -> FormatResult<Self> {
        let file = TnzFile {
            network,
            shape,
            plan,
            eps,
        };
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> FormatResult<()> {
        let shape_numel = self
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if shape_numel != Some(self.network.numel()) {
            return Err(FormatError::Malformed(format!(
                "shape {:?} does not match a network with {} entries",
                self.shape,
                self.network.numel()
            )));
        }
        if let Some(plan) = &self.plan {
            if plan.original_dims != self.shape {
                return Err(FormatError::Malformed("plan and shape disagree".into()));
            }
            for (n, (f, &d)) in plan.factors.iter().zip(&plan.original_dims).enumerate() {
                if f.is_empty() || f.iter().product::<usize>() != d {
                    return Err(FormatError::Malformed(format!(
                        "plan factors {f:?} do not multiply to mode {n} size {d}"
                    )));
                }
            }
            if plan.factors.len() != plan.original_dims.len()
                || plan.quantized_dims() != self.network.dims()
            {
                return Err(FormatError::Malformed(
                    "plan does not match the network modes".into(),
                ));
            }
            if !matches!(self.network, Network::Tt(_)) {
                return Err(FormatError::Malformed(
                    "quantization plans apply to TT containers only".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> Tag {
        self.network.tag()
    }

    /// Dense reconstruction in [`TnzFile::shape`].
    pub fn densify(&self) -> FormatResult<DenseTensor> {
        let raw = self.network.full()?;
        let t = match &self.plan {
            Some(plan) => dequantize(&raw, plan)?,
            None => raw,
        };
        if t.dims() == self.shape.as_slice() {
            Ok(t)
        } else {
            Ok(t.into_reshape(&self.shape)?)
        }
    }

    /// `prod(shape) / param_count`.
    pub fn compression_ratio(&self) -> f64 {
        let full: f64 = self.shape.iter().map(|&d| d as f64).product();
        full / self.network.param_count() as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&TNZ_MAGIC);
        put_u32(&mut out, TNZ_VERSION);
        put_u32(&mut out, self.tag() as u32);
        put_sizes(&mut out, &self.shape);
        out.extend_from_slice(&self.eps.to_le_bytes());
        match &self.plan {
            None => out.push(0),
            Some(plan) => {
                out.push(1);
                out.push(u8::from(plan.interleave));
                put_len(&mut out, plan.factors.len());
                for f in &plan.factors {
                    put_sizes(&mut out, f);
                }
            }
        }
        let records = self.network.records();
        put_len(&mut out, records.len());
        for r in &records {
            put_tensor(&mut out, r);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> FormatResult<Self> {
        let mut r = Reader::new(bytes);
        r.magic(TNZ_MAGIC)?;
        r.version(TNZ_VERSION)?;
        let tag = Tag::from_u32(r.u32()?)?;
        let shape = r.dims()?;
        let eps = r.f64()?;
        let plan = match r.u8()? {
            0 => None,
            1 => {
                let interleave = match r.u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(FormatError::Malformed(format!("interleave flag {b}"))),
                };
                let modes = r.u32()? as usize;
                if modes != shape.len() {
                    return Err(FormatError::Malformed(format!(
                        "plan has {modes} modes, shape has {}",
                        shape.len()
                    )));
                }
                let factors = (0..modes)
                    .map(|_| r.dims())
                    .collect::<FormatResult<Vec<_>>>()?;
                Some(QuantizationPlan {
                    original_dims: shape.clone(),
                    factors,
                    interleave,
                })
            }
            b => return Err(FormatError::Malformed(format!("plan flag {b}"))),
        };
        let count = r.u32()? as usize;
        let mut records = Vec::new();
        for _ in 0..count {
            records.push(r.tensor()?);
        }
        r.finish()?;
        TnzFile::new(Network::from_records(tag, records)?, shape, plan, eps)
    }

    pub fn read(path: &Path) -> FormatResult<Self> {
        TnzFile::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> FormatResult<()> {
        Ok(fs::write(path, self.to_bytes())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: &[usize]) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::new(dims.to_vec(), (0..n).map(|k| k as f64).collect()).unwrap()
    }

    #[test]
    fn dense_header_layout() {
        let b = dense_to_bytes(&seq(&[2, 3]));
        assert_eq!(&b[..4], b"DTEN");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[20..28].try_into().unwrap()), 3);
        assert_eq!(b.len(), 28 + 6 * 8);
        assert_eq!(
            f64::from_le_bytes(b[28 + 8..28 + 16].try_into().unwrap()),
            1.0
        );
    }

    #[test]
    fn scalar_and_sequential_round_trips() {
        for t in [DenseTensor::scalar(-2.5), seq(&[2, 3, 4])] {
            let b = dense_to_bytes(&t);
            let back = dense_from_bytes(&b).unwrap();
            assert_eq!(back, t);
            assert_eq!(dense_to_bytes(&back), b);
        }
    }

    #[test]
    fn dense_errors_are_distinct() {
        let good = dense_to_bytes(&seq(&[2, 3]));
        let mut bad = good.clone();
        bad[0] = b'X';
        let e = dense_from_bytes(&bad).unwrap_err();
        assert!(e.to_string().starts_with("bad magic"));
        let trunc = dense_from_bytes(&good[..good.len() - 3]).unwrap_err();
        assert!(matches!(trunc, FormatError::Truncated { .. }));
        let mut huge = Vec::from(*b"DTEN");
        huge.extend_from_slice(&1u32.to_le_bytes());
        huge.extend_from_slice(&2u32.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        let over = dense_from_bytes(&huge).unwrap_err();
        assert!(matches!(over, FormatError::CountOverflow(_)));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            dense_from_bytes(&trailing),
            Err(FormatError::TrailingBytes(1))
        ));
        let codes = [
            e.code(),
            trunc.code(),
            over.code(),
            FormatError::TrailingBytes(1).code(),
        ];
        let mut uniq = codes.to_vec();
        uniq.dedup();
        assert_eq!(uniq.len(), codes.len());
    }

    #[test]
    fn wrong_version_rejected() {
        let mut b = dense_to_bytes(&seq(&[2]));
        b[4] = 9;
        assert!(matches!(dense_from_bytes(&b), Err(FormatError::Version(9))));
    }
}
