//! Argument parsing and subcommand dispatch for the `tnet` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;
use tnet_core::cp::{cp_als, CpAlsOptions, KruskalTensor};
use tnet_core::qtt::{qtt_compress, quantize, QuantizationPlan};
use tnet_core::tt::{
    mpo_matvec, tt_add, tt_hadamard, tt_inner, tt_orthogonalize, tt_round, tt_svd, TtMatrix,
};
use tnet_core::tucker::{
    sthosvd, sthosvd_ranks, tucker_add, tucker_hadamard, tucker_inner, TuckerTensor,
};
use tnet_core::{DenseTensor, TensorError};

use crate::format::{read_dense, write_dense, FormatError, Network, TnzFile};
use crate::gen::{gen_synthetic, GenKind, GenParams};

/// Relative errors at or below this pass `verify` even when the recorded eps
/// is smaller, e.g. 0 for lossless runs.
pub const VERIFY_FLOOR: f64 = 1e-12;

/// Upper end of the CP rank search when `--max-rank` is absent.
pub const CP_DEFAULT_MAX_RANK: usize = 16;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tnet",
    version,
    about = "Compress, inspect and operate on tensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompressFormat {
    Tt,
    Qtt,
    Tucker,
    Cp,
    /// Matrix input only: TT-matrix over base-`q` levels of rows and columns.
    Mpo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OpKind {
    Add,
    Hadamard,
    Inner,
    Matvec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    RandTt,
    RandTucker,
    Rank1,
    Hilbert,
    Ramp,
    Geometric,
}

impl From<Kind> for GenKind {
    fn from(k: Kind) -> GenKind {
        match k {
            Kind::RandTt => GenKind::RandTt,
            Kind::RandTucker => GenKind::RandTucker,
            Kind::Rank1 => GenKind::Rank1,
            Kind::Hilbert => GenKind::Hilbert,
            Kind::Ramp => GenKind::Ramp,
            Kind::Geometric => GenKind::Geometric,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a dense tensor to a network container.
    Compress {
        #[arg(long, value_enum)]
        format: CompressFormat,
        /// Relative Frobenius accuracy.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        max_rank: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Quantization base for qtt and mpo.
        #[arg(long, default_value_t = 2)]
        base: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Densify a container.
    Decompress { input: PathBuf, output: PathBuf },
    /// Recompress a TT or MPO container to relative accuracy `eps`.
    Round {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        max_rank: Option<usize>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Move the orthogonality center of a TT or MPO container (1-based).
    Ortho {
        #[arg(long)]
        center: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Summarize a container.
    Info {
        #[arg(long)]
        json: bool,
        input: PathBuf,
    },
    /// Arithmetic in compressed form.
    Op {
        #[arg(value_enum)]
        op: OpKind,
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Relative accuracy for rounding the result.
        #[arg(long)]
        round_eps: Option<f64>,
    },
    /// Write a synthetic dense tensor.
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ratio of the geometric family.
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        output: PathBuf,
    },
    /// Compare a container against the dense original.
    Verify {
        #[arg(long)]
        json: bool,
        dense: PathBuf,
        tnz: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Tensor(TensorError::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Format(_) | CliError::Tensor(_) | CliError::Output(_) => EXIT_IO,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs the command line against standard output.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with(args, &mut lock)
}

/// Runs the command line, writing human or JSON output to `out`; errors go
/// to standard error. Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                CliError::Format(f) => eprintln!("error[{}]: {f}", f.code()),
                other => eprintln!("error: {other}"),
            }
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Compress {
            format,
            eps,
            max_rank,
            seed,
            base,
            input,
            output,
        } => compress(format, eps, max_rank, seed, base, &input, &output, out),
        Command::Decompress { input, output } => {
            let f = TnzFile::read(&input)?;
            let t = f.densify()?;
            write_dense(&output, &t)?;
            writeln!(out, "wrote {}: dims {}", output.display(), join(t.dims()))?;
            Ok(EXIT_OK)
        }
        Command::Round {
            eps,
            max_rank,
            input,
            output,
        } => {
            check_eps(eps)?;
            let f = TnzFile::read(&input)?;
            let network = match &f.network {
                Network::Tt(x) => Network::Tt(tt_round(x, eps, max_rank)?),
                Network::Mpo(a) => Network::Mpo(TtMatrix::from_tt(
                    &tt_round(&a.to_tt()?, eps, max_rank)?,
                    &a.row_dims(),
                    &a.col_dims(),
                )?),
                other => {
                    return Err(usage(format!(
                        "round supports TT and MPO containers, not {}",
                        other.tag().name()
                    )))
                }
            };
            // ||T - Y|| <= e0 ||T|| + e ||X|| <= (e0 + e (1 + e0)) ||T||
            let total = f.eps + eps * (1.0 + f.eps);
            let g = TnzFile::new(network, f.shape, f.plan, total)?;
            g.write(&output)?;
            report_written(out, &output, &g)?;
            Ok(EXIT_OK)
        }
        Command::Ortho {
            center,
            input,
            output,
        } => {
            let f = TnzFile::read(&input)?;
            let order = f.network.dims().len();
            if center == 0 || center > order {
                return Err(usage(format!(
                    "--center must be in 1..={order}, got {center}"
                )));
            }
            let network = match &f.network {
                Network::Tt(x) => Network::Tt(tt_orthogonalize(x, center - 1)?),
                Network::Mpo(a) => Network::Mpo(TtMatrix::from_tt(
                    &tt_orthogonalize(&a.to_tt()?, center - 1)?,
                    &a.row_dims(),
                    &a.col_dims(),
                )?),
                other => {
                    return Err(usage(format!(
                        "ortho supports TT and MPO containers, not {}",
                        other.tag().name()
                    )))
                }
            };
            let g = TnzFile::new(network, f.shape, f.plan, f.eps)?;
            g.write(&output)?;
            report_written(out, &output, &g)?;
            Ok(EXIT_OK)
        }
        Command::Info { json, input } => {
            let f = TnzFile::read(&input)?;
            info(&f, json, out)?;
            Ok(EXIT_OK)
        }
        Command::Op {
            op,
            a,
            b,
            output,
            round_eps,
        } => operate(op, &a, &b, output.as_deref(), round_eps, out),
        Command::Gen {
            kind,
            dims,
            ranks,
            seed,
            rho,
            output,
        } => {
            let t = gen_synthetic(kind.into(), &GenParams { dims, ranks, rho }, seed)?;
            write_dense(&output, &t)?;
            writeln!(out, "wrote {}: dims {}", output.display(), join(t.dims()))?;
            Ok(EXIT_OK)
        }
        Command::Verify { json, dense, tnz } => verify(&dense, &tnz, json, out),
    }
}

fn check_eps(eps: f64) -> CliResult<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(usage(format!(
            "--eps must be a nonnegative number, got {eps}"
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn compress(
    format: CompressFormat,
    eps: f64,
    max_rank: Option<usize>,
    seed: u64,
    base: usize,
    input: &Path,
    output: &Path,
    out: &mut dyn Write,
) -> CliResult<i32> {
    check_eps(eps)?;
    if max_rank == Some(0) {
        return Err(usage("--max-rank must be at least 1"));
    }
    let t = read_dense(input)?;
    if t.order() == 0 {
        return Err(usage("cannot compress an order-0 tensor"));
    }
    let abs = eps * t.norm();
    let shape = t.dims().to_vec();
    let file = match format {
        CompressFormat::Tt => {
            TnzFile::new(Network::Tt(tt_svd(&t, abs, max_rank)?), shape, None, eps)?
        }
        CompressFormat::Qtt => {
            let plan = QuantizationPlan::tensor(&shape, base)?;
            let x = match max_rank {
                None => qtt_compress(&t, &plan, abs)?.0,
                Some(r) => tt_svd(&quantize(&t, &plan)?, abs, Some(r))?,
            };
            TnzFile::new(Network::Tt(x), shape, Some(plan), eps)?
        }
        CompressFormat::Tucker => TnzFile::new(
            Network::Tucker(compress_tucker(&t, abs, max_rank)?),
            shape,
            None,
            eps,
        )?,
        CompressFormat::Cp => {
            let k = compress_cp(&t, eps, max_rank.unwrap_or(CP_DEFAULT_MAX_RANK), seed)?;
            TnzFile::new(Network::Cp(k), shape, None, eps)?
        }
        CompressFormat::Mpo => {
            if t.order() != 2 {
                return Err(usage(format!(
                    "mpo compression needs a matrix, got order {}",
                    t.order()
                )));
            }
            let plan = QuantizationPlan::matrix(shape[0], shape[1], base)?;
            let mut a =
                TtMatrix::from_matrix(&t.to_matrix()?, &plan.factors[0], &plan.factors[1], abs)?;
            if let Some(r) = max_rank {
                a = TtMatrix::from_tt(
                    &tt_round(&a.to_tt()?, 0.0, Some(r))?,
                    &plan.factors[0],
                    &plan.factors[1],
                )?;
            }
            TnzFile::new(Network::Mpo(a), shape, None, eps)?
        }
    };
    file.write(output)?;
    report_written(out, output, &file)?;
    Ok(EXIT_OK)
}

fn compress_tucker(t: &DenseTensor, abs: f64, max_rank: Option<usize>) -> CliResult<TuckerTensor> {
    let x = sthosvd(t, abs)?;
    match max_rank {
        Some(cap) if x.ranks().iter().any(|&r| r > cap) => {
            let ranks: Vec<usize> = x.ranks().iter().map(|&r| r.min(cap)).collect();
            Ok(sthosvd_ranks(t, &ranks)?)
        }
        _ => Ok(x),
    }
}

/// Smallest CP rank up to `max_rank` whose ALS fit reaches `1 - eps`; the
/// best fit found is kept when none does.
fn compress_cp(t: &DenseTensor, eps: f64, max_rank: usize, seed: u64) -> CliResult<KruskalTensor> {
    let opts = CpAlsOptions {
        max_iters: 500,
        fit_tol: 1e-12,
        seed,
        restarts: 3,
    };
    let mut best: Option<(f64, KruskalTensor)> = None;
    for r in 1..=max_rank {
        let res = cp_als(t, r, &opts)?;
        let err = 1.0 - res.fit;
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, res.tensor));
        }
        if err <= eps {
            break;
        }
    }
    let (err, k) = best.expect("at least one rank tried");
    if err > eps {
        log::warn!(
            "CP up to rank {max_rank} reaches relative error {err:e}, above the requested {eps:e}"
        );
    }
    Ok(k)
}

fn operate(
    op: OpKind,
    a: &Path,
    b: &Path,
    output: Option<&Path>,
    round_eps: Option<f64>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    if let Some(e) = round_eps {
        check_eps(e)?;
    }
    let fa = TnzFile::read(a)?;
    let fb = TnzFile::read(b)?;
    let mismatch = || {
        usage(
            format!(
                "op {op:?} is not defined for {} and {} containers",
                fa.tag().name(),
                fb.tag().name()
            )
            .to_lowercase(),
        )
    };
    if op == OpKind::Inner {
        check_same_layout(&fa, &fb)?;
        let v = match (&fa.network, &fb.network) {
            (Network::Tt(x), Network::Tt(y)) => tt_inner(x, y)?,
            (Network::Tucker(x), Network::Tucker(y)) => tucker_inner(x, y)?,
            _ => return Err(mismatch()),
        };
        writeln!(out, "inner: {v}")?;
        return Ok(EXIT_OK);
    }
    let (network, shape, plan) = match (op, &fa.network, &fb.network) {
        (OpKind::Add | OpKind::Hadamard, Network::Tt(x), Network::Tt(y)) => {
            check_same_layout(&fa, &fb)?;
            let z = if op == OpKind::Add {
                tt_add(x, y)?
            } else {
                tt_hadamard(x, y)?
            };
            (Network::Tt(z), fa.shape.clone(), fa.plan.clone())
        }
        (OpKind::Add | OpKind::Hadamard, Network::Tucker(x), Network::Tucker(y)) => {
            check_same_layout(&fa, &fb)?;
            if round_eps.is_some() {
                return Err(usage("--round-eps applies to TT results only"));
            }
            let z = if op == OpKind::Add {
                tucker_add(x, y)?
            } else {
                tucker_hadamard(x, y)?
            };
            (Network::Tucker(z), fa.shape.clone(), None)
        }
        (OpKind::Matvec, Network::Mpo(m), Network::Tt(x)) => {
            let y = mpo_matvec(m, x, None)?;
            let rows = m.row_dims();
            let n: usize = rows.iter().product();
            match &fb.plan {
                Some(p) if p.original_dims.len() == 1 => {
                    let plan = QuantizationPlan {
                        original_dims: vec![n],
                        factors: vec![rows],
                        interleave: false,
                    };
                    (Network::Tt(y), vec![n], Some(plan))
                }
                _ => (Network::Tt(y), rows, None),
            }
        }
        _ => return Err(mismatch()),
    };
    let network = match (network, round_eps) {
        (Network::Tt(z), Some(e)) => Network::Tt(tt_round(&z, e, None)?),
        (n, _) => n,
    };
    let file = TnzFile::new(network, shape, plan, round_eps.unwrap_or(0.0))?;
    match output {
        Some(path) => {
            file.write(path)?;
            report_written(out, path, &file)?;
        }
        None => {
            writeln!(out, "ranks: {}", join(&file.network.ranks()))?;
            writeln!(out, "params: {}", file.network.param_count())?;
        }
    }
    Ok(EXIT_OK)
}

fn check_same_layout(a: &TnzFile, b: &TnzFile) -> CliResult<()> {
    if a.shape != b.shape || a.plan != b.plan || a.network.dims() != b.network.dims() {
        return Err(CliError::Tensor(TensorError::DimensionMismatch(format!(
            "operands have shapes {:?} and {:?}",
            a.shape, b.shape
        ))));
    }
    Ok(())
}

fn verify(dense: &Path, tnz: &Path, json: bool, out: &mut dyn Write) -> CliResult<i32> {
    let t = read_dense(dense)?;
    let f = TnzFile::read(tnz)?;
    let x = f.densify()?;
    if x.dims() != t.dims() {
        return Err(CliError::Tensor(TensorError::DimensionMismatch(format!(
            "dense tensor {:?} vs container shape {:?}",
            t.dims(),
            x.dims()
        ))));
    }
    let abs = t.distance(&x)?;
    let norm = t.norm();
    let rel = if norm > 0.0 {
        abs / norm
    } else if abs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let pass = rel <= f.eps.max(VERIFY_FLOOR);
    if json {
        let doc = json!({
            "abs_error": abs,
            "rel_error": rel,
            "eps": f.eps,
            "norm": norm,
            "norm_sq": t.norm_sq(),
            "pass": pass,
        });
        writeln!(out, "{doc}")?;
    } else {
        writeln!(out, "abs_error: {abs}")?;
        writeln!(out, "rel_error: {rel}")?;
        writeln!(out, "eps: {}", f.eps)?;
        writeln!(out, "norm: {norm}")?;
        writeln!(out, "norm_sq: {}", t.norm_sq())?;
        writeln!(out, "{}", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
}

fn info(f: &TnzFile, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let mut doc = Map::new();
    doc.insert("format".into(), json!(f.tag().name()));
    doc.insert("order".into(), json!(f.network.dims().len()));
    doc.insert("dims".into(), json!(f.network.dims()));
    if let Network::Mpo(a) = &f.network {
        doc.insert("col_dims".into(), json!(a.col_dims()));
    }
    doc.insert("shape".into(), json!(f.shape));
    doc.insert("ranks".into(), json!(f.network.ranks()));
    doc.insert("params".into(), json!(f.network.param_count()));
    doc.insert("compression_ratio".into(), json!(f.compression_ratio()));
    doc.insert("eps".into(), json!(f.eps));
    doc.insert("quantized".into(), json!(f.plan.is_some()));
    if json {
        writeln!(out, "{}", Value::Object(doc))?;
        return Ok(());
    }
    for (k, v) in &doc {
        let text = match v {
            Value::Array(items) => items
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        writeln!(out, "{k}: {text}")?;
    }
    Ok(())
}

fn report_written(out: &mut dyn Write, path: &Path, f: &TnzFile) -> CliResult<()> {
    writeln!(
        out,
        "wrote {}: {} ranks {} params {} ratio {}",
        path.display(),
        f.tag().name(),
        join(&f.network.ranks()),
        f.network.param_count(),
        f.compression_ratio()
    )?;
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
